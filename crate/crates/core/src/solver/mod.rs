//! Method-of-lines integration of the competition system and of its
//! cooperative transform `ṽ = v* - v` on truncated lattice windows.
//!
//! A window holds sites `x_i = first_index + i + offset`, `i = 0..n`. Values
//! just outside the window ("ghosts") are injected by a [`Ghosts`] policy.

mod dopri;
mod family;

use serde::{Deserialize, Serialize};

use crate::env::Medium;
use crate::equilibria::EquilibriumPath;
use crate::error::{Error, Result};

pub use dopri::{integrate, IntegratorOptions, StepStats, Trajectory};
pub use family::{integrate_offset_family, OffsetFamily, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Competition,
    Cooperative,
}

/// Values of both species on a finite window at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    /// Sublattice phase in `[0, 1)`.
    pub offset: f64,
    pub first_index: i64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
    pub frame: Frame,
}

impl LatticeState {
    pub fn zeros(first_index: i64, offset: f64, n: usize, time: f64, frame: Frame) -> Self {
        Self { offset, first_index, u: vec![0.0; n], v: vec![0.0; n], time, frame }
    }

    /// Samples `f(x) -> (u, v)` at the sites starting at real position `x_start`.
    pub fn from_fn(
        x_start: f64,
        n: usize,
        time: f64,
        frame: Frame,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Self {
        let first = x_start.floor();
        let mut s = Self::zeros(first as i64, x_start - first, n, time, frame);
        for i in 0..n {
            let (u, v) = f(s.x(i));
            s.u[i] = u;
            s.v[i] = v;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.first_index as f64 + i as f64 + self.offset
    }

    pub fn same_window(&self, other: &LatticeState) -> bool {
        self.first_index == other.first_index
            && self.offset == other.offset
            && self.len() == other.len()
    }
}

/// `u_{i+1} - 2 u_i + u_{i-1}` at an interior site.
pub fn discrete_laplacian(values: &[f64], i: usize) -> Result<f64> {
    if i == 0 || i + 1 >= values.len() {
        return Err(Error::InvalidParameter(format!(
            "site {i} is not interior to a window of {} sites",
            values.len()
        )));
    }
    Ok(values[i + 1] - 2.0 * values[i] + values[i - 1])
}

/// Ghost values outside the window.
#[derive(Clone, Copy)]
pub enum Ghosts<'a> {
    /// Left ghost at the invaded homogeneous state, right ghost at the
    /// uninvaded one: `(u*, v*)` / `(0, 0)` in the cooperative frame,
    /// `(u*, 0)` / `(0, v*)` in the competition frame.
    Equilibrium,
    Fixed {
        left: (f64, f64),
        right: (f64, f64),
    },
    /// `(x, t) -> (u, v)`, e.g. an ansatz.
    Function(&'a (dyn Fn(f64, f64) -> (f64, f64) + Sync)),
}

/// Label recorded in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    ClampLeftToEquilibrium,
    ClampToAnsatz,
    Fixed,
}

impl Ghosts<'_> {
    pub fn policy(&self) -> BoundaryPolicy {
        match self {
            Ghosts::Equilibrium => BoundaryPolicy::ClampLeftToEquilibrium,
            Ghosts::Fixed { .. } => BoundaryPolicy::Fixed,
            Ghosts::Function(_) => BoundaryPolicy::ClampToAnsatz,
        }
    }
}

/// A right-hand side of a two-component lattice system.
pub trait LatticeSystem: Sync {
    fn frame(&self) -> Frame;

    /// Writes `du`, `dv` for the window whose site 0 sits at `x0`.
    fn rhs(&self, t: f64, x0: f64, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]);

    /// Upper bound of the `v` component (cooperative frame: `v*(t)`).
    fn v_upper(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Coefficient variation rate used to cap the step size.
    fn variation_rate(&self) -> f64 {
        0.0
    }
}

#[inline]
fn neighbours(values: &[f64], i: usize, left: f64, right: f64) -> (f64, f64) {
    let l = if i == 0 { left } else { values[i - 1] };
    let r = if i + 1 == values.len() { right } else { values[i + 1] };
    (l, r)
}

/// Homogeneous reference states `u*`, `v*`.
#[derive(Clone, Copy)]
pub struct States<'a> {
    pub u_star: &'a EquilibriumPath,
    pub v_star: &'a EquilibriumPath,
}

/// The competition system in original variables.
pub struct Competition<'a> {
    pub medium: &'a Medium,
    pub states: Option<States<'a>>,
    pub ghosts: Ghosts<'a>,
}

impl<'a> Competition<'a> {
    pub fn new(medium: &'a Medium, ghosts: Ghosts<'a>) -> Self {
        Self { medium, states: None, ghosts }
    }

    pub fn with_states(mut self, states: States<'a>) -> Self {
        self.states = Some(states);
        self
    }

    fn ghost_pair(&self, t: f64, xl: f64, xr: f64) -> ((f64, f64), (f64, f64)) {
        match self.ghosts {
            Ghosts::Equilibrium => {
                let s = self.states.expect("equilibrium ghosts need u*, v*");
                ((s.u_star.eval(t), 0.0), (0.0, s.v_star.eval(t)))
            }
            Ghosts::Fixed { left, right } => (left, right),
            Ghosts::Function(f) => (f(xl, t), f(xr, t)),
        }
    }
}

impl LatticeSystem for Competition<'_> {
    fn frame(&self) -> Frame {
        Frame::Competition
    }

    fn rhs(&self, t: f64, x0: f64, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let c = self.medium.coeffs_at(t);
        let n = u.len();
        let ((ul, vl), (ur, vr)) = self.ghost_pair(t, x0 - 1.0, x0 + n as f64);
        for i in 0..n {
            let (um, up) = neighbours(u, i, ul, ur);
            let (vm, vp) = neighbours(v, i, vl, vr);
            let (ui, vi) = (u[i], v[i]);
            du[i] = up - 2.0 * ui + um + ui * (c.a1 - c.b1 * ui - c.c1 * vi);
            dv[i] = vp - 2.0 * vi + vm + vi * (c.a2 - c.b2 * ui - c.c2 * vi);
        }
    }

    fn variation_rate(&self) -> f64 {
        self.medium.variation_rate()
    }
}

/// The cooperative system obtained from `ṽ = v* - v`.
pub struct Cooperative<'a> {
    pub medium: &'a Medium,
    pub states: States<'a>,
    pub ghosts: Ghosts<'a>,
}

impl<'a> Cooperative<'a> {
    pub fn new(medium: &'a Medium, states: States<'a>, ghosts: Ghosts<'a>) -> Self {
        Self { medium, states, ghosts }
    }
}

impl LatticeSystem for Cooperative<'_> {
    fn frame(&self) -> Frame {
        Frame::Cooperative
    }

    fn rhs(&self, t: f64, x0: f64, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let c = self.medium.coeffs_at(t);
        let vs = self.states.v_star.eval(t);
        let n = u.len();
        let ((ul, vl), (ur, vr)) = match self.ghosts {
            Ghosts::Equilibrium => ((self.states.u_star.eval(t), vs), (0.0, 0.0)),
            Ghosts::Fixed { left, right } => (left, right),
            Ghosts::Function(f) => (f(x0 - 1.0, t), f(x0 + n as f64, t)),
        };
        let growth_v = c.a2 - 2.0 * c.c2 * vs;
        for i in 0..n {
            let (um, up) = neighbours(u, i, ul, ur);
            let (vm, vp) = neighbours(v, i, vl, vr);
            let (ui, vi) = (u[i], v[i]);
            du[i] = up - 2.0 * ui + um + ui * (c.a1 - c.b1 * ui - c.c1 * (vs - vi));
            dv[i] = vp - 2.0 * vi + vm + c.b2 * (vs - vi) * ui + vi * (growth_v + c.c2 * vi);
        }
    }

    fn v_upper(&self, t: f64) -> Option<f64> {
        Some(self.states.v_star.eval(t))
    }

    fn variation_rate(&self) -> f64 {
        self.medium.variation_rate()
    }
}

/// Linearization of the invading equation at `(0, v*)`:
/// `u' = H u + λ(t) u`, `v' = 0`. Right ghost is zero, left ghost extrapolates
/// `u` geometrically from the first two sites.
pub struct LinearizedInvasion<'a> {
    pub medium: &'a Medium,
    pub v_star: &'a EquilibriumPath,
}

impl LatticeSystem for LinearizedInvasion<'_> {
    fn frame(&self) -> Frame {
        Frame::Cooperative
    }

    fn rhs(&self, t: f64, _x0: f64, u: &[f64], _v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let lam = crate::dispersion::lambda_at(self.medium, self.v_star, t);
        let n = u.len();
        let ul = if n >= 2 && u[1] > 0.0 { u[0] * u[0] / u[1] } else { u[0] };
        let ur = if n >= 2 && u[n - 2] > 0.0 { u[n - 1] * u[n - 1] / u[n - 2] } else { 0.0 };
        for i in 0..n {
            let (um, up) = neighbours(u, i, ul, ur);
            du[i] = up - 2.0 * u[i] + um + lam * u[i];
            dv[i] = 0.0;
        }
    }

    fn variation_rate(&self) -> f64 {
        self.medium.variation_rate()
    }
}

/// Switches to the cooperative frame: `(u, v) -> (u, v*(t) - v)`.
pub fn to_cooperative(state: &LatticeState, v_star: &EquilibriumPath) -> LatticeState {
    flip(state, v_star, Frame::Competition, Frame::Cooperative)
}

/// Inverse of [`to_cooperative`].
pub fn from_cooperative(state: &LatticeState, v_star: &EquilibriumPath) -> LatticeState {
    flip(state, v_star, Frame::Cooperative, Frame::Competition)
}

fn flip(state: &LatticeState, v_star: &EquilibriumPath, from: Frame, to: Frame) -> LatticeState {
    assert_eq!(state.frame, from, "state is not in the {from:?} frame");
    let vs = v_star.eval(state.time);
    let mut out = state.clone();
    out.frame = to;
    for v in out.v.iter_mut() {
        *v = vs - *v;
    }
    out
}

/// Result of a componentwise order comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub holds: bool,
    /// `max_i max(u^A_i - u^B_i, v^A_i - v^B_i, 0)`.
    pub max_violation: f64,
    /// `min_i min(u^B_i - u^A_i, v^B_i - v^A_i)`; positive means strict order.
    pub min_gap: f64,
}

/// `A ≤ B` componentwise, ignoring `collar` sites at each end of the window.
pub fn order_leq_collar(a: &LatticeState, b: &LatticeState, collar: usize) -> Result<OrderCheck> {
    if !a.same_window(b) {
        return Err(Error::WindowMismatch(format!(
            "windows ({}, {}, {}) and ({}, {}, {}) differ",
            a.first_index,
            a.offset,
            a.len(),
            b.first_index,
            b.offset,
            b.len()
        )));
    }
    let n = a.len();
    let mut worst = 0.0f64;
    let mut gap = f64::INFINITY;
    for i in collar..n.saturating_sub(collar) {
        let du = b.u[i] - a.u[i];
        let dv = b.v[i] - a.v[i];
        worst = worst.max(-du).max(-dv);
        gap = gap.min(du).min(dv);
    }
    Ok(OrderCheck { holds: worst <= 0.0, max_violation: worst, min_gap: gap })
}

/// `A ≤ B` componentwise on the full window.
pub fn order_leq(a: &LatticeState, b: &LatticeState) -> Result<OrderCheck> {
    order_leq_collar(a, b, 0)
}
