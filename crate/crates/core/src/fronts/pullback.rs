//! Pullback construction of the front: solutions started from the
//! super-solution at `-τ` decrease as `τ` grows and converge to an entire
//! solution.

use serde::{Deserialize, Serialize};

use super::{build_ansatz, AnsatzOptions, WaveAnsatz};
use crate::env::{Horizon, Medium};
use crate::equilibria::{Equilibria, EquilibriumOptions};
use crate::error::{invalid, Error, Result};
use crate::solver::{
    integrate_offset_family, Cooperative, Ghosts, IntegratorOptions, States, StepStats,
};

/// Values below this are flushed to zero in initial data.
const UNDERFLOW: f64 = 1e-290;

/// A fixed window of `n_sites` sites per phase, the first at `x_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_start: f64,
    pub n_sites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullbackOptions {
    /// Increasing pullback depths.
    pub taus: Vec<f64>,
    pub tol_pb: f64,
    /// Number of sublattice phases; profiles are sampled at spacing `1/phases`.
    pub phases: usize,
    pub eval_times: Vec<f64>,
    /// Defaults to a window covering the front from `-τ_max` to the last
    /// evaluation time.
    pub window: Option<Window>,
    /// Sites kept behind the super-solution's saturation point at `-τ_max`.
    pub left_margin: f64,
    /// Right margin in units of `1/μ` (the truncation error is `e^{-this}`).
    pub right_decay: f64,
    /// Stop at the first pair of depths closer than `tol_pb`.
    pub stop_when_converged: bool,
    /// Admissible numerical excess in ordering checks (τ-monotonicity and
    /// the sandwich).
    pub order_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            taus: vec![25.0, 50.0, 100.0, 200.0],
            tol_pb: 1e-4,
            phases: 4,
            eval_times: vec![0.0],
            window: None,
            left_margin: 50.0,
            right_decay: 50.0,
            stop_when_converged: true,
            order_tol: 1e-9,
            // global error must stay well below `order_tol` over a few
            // hundred time units
            integrator: IntegratorOptions { rtol: 1e-12, atol: 1e-13, ..Default::default() },
        }
    }
}

impl PullbackOptions {
    fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.taus[0] <= 0.0 || self.taus.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("τ schedule must be positive and increasing"));
        }
        if self.eval_times.is_empty() || self.eval_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("evaluation times must be non-empty and increasing"));
        }
        if self.eval_times[0] <= -self.taus[0] {
            return Err(invalid("evaluation times must come after -τ for every τ"));
        }
        if self.phases == 0 {
            return Err(invalid("at least one phase is needed"));
        }
        Ok(())
    }

    fn t_min(&self) -> f64 {
        -self.taus[self.taus.len() - 1]
    }

    fn t_max(&self) -> f64 {
        self.eval_times[self.eval_times.len() - 1]
    }
}

/// The pullback front at one evaluation time, in the cooperative frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSlice {
    pub t: f64,
    /// `S(t)`; the moving coordinate is `ξ = x - S(t)`.
    pub shift: f64,
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FrontSlice {
    pub fn xi(&self) -> Vec<f64> {
        self.x.iter().map(|x| x - self.shift).collect()
    }

    /// Largest increase between consecutive samples of either component.
    pub fn max_uptick(&self) -> f64 {
        [&self.phi, &self.psi]
            .iter()
            .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontProfile {
    pub slices: Vec<FrontSlice>,
    pub window: Window,
    pub phases: usize,
    pub taus_used: Vec<f64>,
    /// Sup-norm differences between consecutive depths.
    pub gaps: Vec<f64>,
    pub tol_pb: f64,
    pub converged: bool,
    /// Largest `U_{τ'} - U_τ` for `τ' > τ` (should not be positive).
    pub tau_violation: f64,
    pub stats: Vec<StepStats>,
}

impl FrontProfile {
    pub fn gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_uptick(&self) -> f64 {
        self.slices.iter().map(FrontSlice::max_uptick).fold(0.0, f64::max)
    }
}

fn default_window(ansatz: &WaveAnsatz, opts: &PullbackOptions) -> Window {
    let left = (ansatz.shift(opts.t_min()) - opts.left_margin).floor();
    let right = ansatz.shift(opts.t_max()) + opts.right_decay / ansatz.mu;
    Window { x_start: left, n_sites: (right - left).ceil() as usize }
}

/// Runs the pullback schedule and returns the limit profile.
pub fn pullback_front(ansatz: &WaveAnsatz, opts: &PullbackOptions) -> Result<FrontProfile> {
    opts.validate()?;
    if !ansatz.horizon.contains(opts.t_min()) || !ansatz.horizon.contains(opts.t_max()) {
        return Err(invalid("pullback times fall outside the ansatz horizon"));
    }
    let window = opts.window.unwrap_or_else(|| default_window(ansatz, opts));
    let eq = &ansatz.equilibria;
    let system = Cooperative::new(
        &ansatz.medium,
        States { u_star: &eq.u_star, v_star: &eq.v_star },
        Ghosts::Equilibrium,
    );

    let mut previous: Option<Vec<crate::solver::Profile>> = None;
    let mut gaps = Vec::new();
    let mut taus_used = Vec::new();
    let mut stats = Vec::new();
    let mut tau_violation = f64::NEG_INFINITY;
    for &tau in &opts.taus {
        let start = -tau;
        let data = |x: f64| {
            let (u, v) = ansatz.super_solution_at(x, start);
            let flush = |w: f64| if w < UNDERFLOW { 0.0 } else { w };
            (flush(u), flush(v))
        };
        let family = integrate_offset_family(
            &system,
            data,
            opts.phases,
            window.x_start,
            window.n_sites,
            start,
            &opts.eval_times,
            &opts.integrator,
        )?;
        stats.push(family.trajectories.iter().fold(StepStats::default(), |acc, tr| StepStats {
            accepted: acc.accepted + tr.stats.accepted,
            rejected: acc.rejected + tr.stats.rejected,
            rhs_evals: acc.rhs_evals + tr.stats.rhs_evals,
            h_min: if acc.accepted == 0 { tr.stats.h_min } else { acc.h_min.min(tr.stats.h_min) },
            h_max: acc.h_max.max(tr.stats.h_max),
        }));
        taus_used.push(tau);
        let profiles = family.profiles;
        if let Some(prev) = &previous {
            let mut gap = 0.0f64;
            let mut rise = f64::NEG_INFINITY;
            let mut at = (0.0, 0.0);
            for (new, old) in profiles.iter().zip(prev) {
                for j in 0..new.len() {
                    let du = new.u[j] - old.u[j];
                    let dv = new.v[j] - old.v[j];
                    gap = gap.max(du.abs()).max(dv.abs());
                    if du.max(dv) > rise {
                        rise = du.max(dv);
                        at = (new.t, new.x[j]);
                    }
                }
            }
            tau_violation = tau_violation.max(rise);
            if rise > opts.order_tol {
                return Err(Error::Numerical(format!(
                    "pullback is not monotone in τ: rise {rise:e} at τ = {tau}, (t, x) = {at:?}"
                )));
            }
            gaps.push(gap);
            if opts.stop_when_converged && gap < opts.tol_pb {
                previous = Some(profiles);
                break;
            }
        }
        previous = Some(profiles);
    }

    let profiles = previous.expect("schedule is non-empty");
    let slices = profiles
        .into_iter()
        .map(|p| FrontSlice { shift: ansatz.shift(p.t), t: p.t, x: p.x, phi: p.u, psi: p.v })
        .collect();
    let converged = gaps.last().is_some_and(|g| *g < opts.tol_pb);
    Ok(FrontProfile {
        slices,
        window,
        phases: opts.phases,
        taus_used,
        gaps,
        tol_pb: opts.tol_pb,
        converged,
        tau_violation: tau_violation.max(0.0),
        stats,
    })
}

/// Worst violations of `sub ≤ U ≤ super` over the slices, ignoring `collar`
/// samples at each end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lower_violation: f64,
    pub upper_violation: f64,
}

impl SandwichReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower_violation <= tol && self.upper_violation <= tol
    }
}

impl FrontProfile {
    pub fn sandwich(&self, ansatz: &WaveAnsatz, collar: usize) -> SandwichReport {
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for s in &self.slices {
            let n = s.x.len();
            for j in collar..n.saturating_sub(collar) {
                let (us, vs) = ansatz.sub_solution_at(s.x[j], s.t);
                let (uu, vu) = ansatz.super_solution_at(s.x[j], s.t);
                lower = lower.max(us - s.phi[j]).max(vs - s.psi[j]);
                upper = upper.max(s.phi[j] - uu).max(s.psi[j] - vu);
            }
        }
        SandwichReport { lower_violation: lower, upper_violation: upper }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontOptions {
    pub gamma: f64,
    pub equilibrium: EquilibriumOptions,
    pub ansatz: AnsatzOptions,
    pub pullback: PullbackOptions,
}

impl Default for FrontOptions {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            equilibrium: EquilibriumOptions::default(),
            ansatz: AnsatzOptions::default(),
            pullback: PullbackOptions::default(),
        }
    }
}

/// Everything produced for one front.
#[derive(Debug, Clone)]
pub struct FrontRun {
    pub ansatz: WaveAnsatz,
    pub profile: FrontProfile,
}

/// Equilibria, ansatz and pullback front for `medium`. A given
/// `lambda_least` replaces the estimated one.
pub fn construct_front(
    medium: &Medium,
    opts: &FrontOptions,
    lambda_least: Option<f64>,
) -> Result<FrontRun> {
    opts.pullback.validate()?;
    let pb = &opts.pullback;
    let horizon = Horizon::new(pb.t_min().min(0.0) - 1.0, pb.t_max().max(0.0) + 1.0)?;
    let mut eq = Equilibria::compute(medium, horizon, &opts.equilibrium)?;
    if let Some(l) = lambda_least {
        eq = eq.with_lambda_least(l);
    }
    let ansatz = build_ansatz(medium, &eq, opts.gamma, horizon, &opts.ansatz)?;
    let profile = pullback_front(&ansatz, pb)?;
    Ok(FrontRun { ansatz, profile })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub t: f64,
    /// `sup |Φ̃(·, t; ω) - Φ̃(·, 0; θ_t ω)|` over both components.
    pub residual: f64,
    pub gap_original: f64,
    pub gap_shifted: f64,
}

/// Compares the front of `medium` at time `t` with the front of the shifted
/// medium at time 0, on aligned moving-frame grids.
pub fn stationarity_check(
    medium: &Medium,
    t: f64,
    opts: &FrontOptions,
) -> Result<StationarityReport> {
    let mut o = opts.clone();
    o.pullback.eval_times = vec![t];
    let original = construct_front(medium, &o, None)?;
    let slice = &original.profile.slices[0];
    let lambda = original.ansatz.equilibria.lambda_least;

    let shifted_medium = medium.shift(t);
    let mut s = opts.clone();
    s.pullback.eval_times = vec![0.0];
    s.pullback.window = Some(Window {
        x_start: original.profile.window.x_start - slice.shift,
        n_sites: original.profile.window.n_sites,
    });
    let shifted = construct_front(&shifted_medium, &s, Some(lambda))?;
    let other = &shifted.profile.slices[0];
    let residual = slice
        .phi
        .iter()
        .zip(&other.phi)
        .chain(slice.psi.iter().zip(&other.psi))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(StationarityReport {
        t,
        residual,
        gap_original: original.profile.gap(),
        gap_shifted: shifted.profile.gap(),
    })
}
