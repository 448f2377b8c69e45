//! Numerical toolkit for two-species competition systems on the integer
//! lattice with coefficients driven by a random, time-dependent medium.
//!
//! The crate is organised bottom-up:
//!
//! * [`env`] realizes one sample path of the medium with an exact time shift,
//!   plus quadrature and least/greatest mean estimation;
//! * [`equilibria`] computes the spatially homogeneous entire solutions
//!   `u*`, `v*`, the auxiliary path `h`, and checks the standing hypotheses;
//! * [`dispersion`] handles the dispersion relation, the critical speed `c0`
//!   and the decay rates for a supercritical speed;
//! * [`solver`] integrates the lattice system (competitive or cooperative
//!   frame) with an embedded Runge-Kutta pair;
//! * [`fronts`] builds super/sub-solutions, pullback fronts and speed
//!   measurements;
//! * [`oracles`] holds slow, independent reference computations used by tests.

pub mod dispersion;
pub mod env;
pub mod equilibria;
pub mod error;
pub mod fronts;
pub mod oracles;
pub mod solver;

pub use error::{Error, Result};
