//! Realizations of the random medium: coefficient paths `a_i(θ_t ω)`,
//! `b_i(θ_t ω)`, `c_i(θ_t ω)` with exact time shifts, quadrature, tabulated
//! paths and least/greatest mean estimation.

mod grid;
mod hash;
mod mean;
mod medium;
pub mod quadrature;

pub use grid::{GridPath, Horizon, PrefixTable};
pub use mean::{mean_estimate, scan_table, MeanEstimate, MeanMode, MeanOptions};
pub use medium::{
    make_medium, smooth_step, Channel, ChannelSpec, Channels, CoefficientSet, Harmonic, Medium,
    MediumKind, MediumSpec,
};
pub use quadrature::{adaptive_simpson, TOL_QUAD};
