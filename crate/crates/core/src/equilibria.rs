//! Spatially homogeneous entire solutions of the single-species problems
//! (`u*`, `v*`), the auxiliary path `h`, the invasion rate
//! `λ(t) = a1 - c1 v*`, and the runtime checks of the standing hypotheses.
//!
//! All three paths solve scalar linear equations after a change of variable
//! (`w = 1/u*` for the logistic equations) and are computed as pullback
//! integrals: the recursion starts `T_pb` before the horizon with zero data,
//! which is exact up to a factor `exp(-∫ decay) ≈ e^{-25}`.

use serde::{Deserialize, Serialize};

use crate::env::quadrature::{gauss_legendre5_points, gauss_legendre5_tails};
use crate::env::{
    mean_estimate, Channel, GridPath, Horizon, MeanEstimate, MeanMode, MeanOptions, Medium,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumOptions {
    pub dt: f64,
    pub tol: f64,
    /// `T_pb = depth_factor / (least mean of the decay rate)`.
    pub depth_factor: f64,
    /// Window length `r` for the λ̲ estimate.
    pub mean_window: f64,
    /// λ̲ is estimated over `[0, mean_span]`.
    pub mean_span: f64,
    /// Window used for decay-rate estimates when choosing `T_pb`.
    pub decay_window: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            tol: 1e-8,
            depth_factor: 25.0,
            mean_window: 1000.0,
            mean_span: 2000.0,
            decay_window: 50.0,
        }
    }
}

/// A positive scalar path tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPath {
    pub path: GridPath,
    /// Pullback depth `T_pb` actually used.
    pub depth: f64,
    /// Largest grid difference between depths `T_pb` and `2 T_pb`.
    pub doubling_gap: f64,
}

impl EquilibriumPath {
    /// Cubic interpolation (clamped outside the horizon).
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.path.eval(t)
    }

    pub fn horizon(&self) -> Horizon {
        self.path.horizon()
    }

    pub fn min(&self) -> f64 {
        self.path.min()
    }

    pub fn max(&self) -> f64 {
        self.path.max()
    }

    /// Constant path, used for closed-form comparisons.
    pub fn constant(value: f64, horizon: Horizon, dt: f64) -> Self {
        Self { path: GridPath::sample(|_| value, horizon, dt), depth: 0.0, doubling_gap: 0.0 }
    }
}

/// One-cell propagator of `y' = -k(t) y + f(t)` on `[a, b]`:
/// `y(b) = y(a)·damping + forcing`. Variation of constants with a
/// five-point Gauss-Legendre rule; the inner integrals `∫_s^b k` come from
/// the quartic interpolant of `k` at the same nodes (error `O(dt^6)`).
fn cell_propagator(k: &impl Fn(f64) -> f64, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let points = gauss_legendre5_points(a, b);
    let kv = points.map(|(s, _)| k(s));
    let tails = gauss_legendre5_tails(&kv, a, b);
    let decay: f64 = points.iter().zip(&kv).map(|((_, w), kv)| w * kv).sum();
    let forcing: f64 =
        points.iter().zip(&tails).map(|(&(s, w), tail)| w * f(s) * (-tail).exp()).sum();
    ((-decay).exp(), forcing)
}

fn propagate(y: f64, cell: (f64, f64)) -> f64 {
    y * cell.0 + cell.1
}

fn least_mean(f: impl Fn(f64) -> f64, horizon: Horizon, r: f64) -> Result<MeanEstimate> {
    mean_estimate(f, horizon, r.min(horizon.len()), MeanMode::Least, MeanOptions::default())
}

/// Pulls `y' = -k(t) y + f(t)` back from `y = 0` at depths `T` and `2T`
/// before the horizon (doubling `T` until the two agree within `2 tol`) and
/// returns the deeper result on the horizon grid. Cell propagators do not
/// depend on the depth, so each is computed once.
fn converged_pullback(
    k: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> f64,
    horizon: Horizon,
    decay_rate: f64,
    opts: &EquilibriumOptions,
) -> Result<(GridPath, f64, f64)> {
    let n = ((horizon.len() / opts.dt).ceil() as usize).max(3);
    let step = horizon.len() / n as f64;
    let on_horizon: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let a = horizon.start + j as f64 * step;
            cell_propagator(&k, &f, a, a + step)
        })
        .collect();
    // before[j] covers [start - (j + 1) step, start - j step]
    let mut before: Vec<(f64, f64)> = Vec::new();
    let mut path_from = |depth: f64| {
        let pre = (depth / step).ceil() as usize;
        while before.len() < pre {
            let b = horizon.start - before.len() as f64 * step;
            before.push(cell_propagator(&k, &f, b - step, b));
        }
        let mut y = before[..pre].iter().rev().fold(0.0, |y, &c| propagate(y, c));
        let mut values = Vec::with_capacity(n + 1);
        values.push(y);
        for &c in &on_horizon {
            y = propagate(y, c);
            values.push(y);
        }
        values
    };
    let mut depth = opts.depth_factor / decay_rate;
    for _ in 0..6 {
        let shallow = path_from(depth);
        let deep = path_from(2.0 * depth);
        let gap = shallow
            .iter()
            .zip(&deep)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        if gap <= 2.0 * opts.tol {
            return Ok((GridPath::new(horizon.start, step, deep), 2.0 * depth, gap));
        }
        depth *= 2.0;
    }
    Err(Error::Numerical("pullback depth doubling did not converge".into()))
}

/// Bounded positive entire solution of `u' = u (a(t) - b(t) u)`:
/// `u*(t) = [∫_{-∞}^t b(s) exp(-∫_s^t a) ds]^{-1}`.
pub fn logistic_equilibrium(
    medium: &Medium,
    growth: Channel,
    limit: Channel,
    horizon: Horizon,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumPath> {
    let a = |t: f64| medium.channel(growth, t);
    let b = |t: f64| medium.channel(limit, t);
    let probe = Horizon::new(horizon.start - 4.0 * opts.decay_window, horizon.end)?;
    let rate = least_mean(a, probe, opts.decay_window)?.value;
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "persistence violated: least mean of {} is {rate} ≤ 0",
            growth.name()
        )));
    }
    let (w, depth, gap) = converged_pullback(a, b, horizon, rate, opts)?;
    let values = w.values.iter().map(|w| 1.0 / w).collect();
    Ok(EquilibriumPath { path: GridPath::new(w.t0, w.dt, values), depth, doubling_gap: gap })
}

/// `κ(t) = (a2 - 2 c2 v*) - (a1 - c1 v*)`, the homogeneous rate of the h-equation.
#[inline]
pub fn kappa(medium: &Medium, v_star: &EquilibriumPath, t: f64) -> f64 {
    let c = medium.coeffs_at(t);
    let v = v_star.eval(t);
    (c.a2 - 2.0 * c.c2 * v) - (c.a1 - c.c1 * v)
}

/// Slack of the pointwise condition `λ ≥ a2 - 2 c2 v* + b2 v*` at `t`.
#[inline]
pub fn dominance_slack(medium: &Medium, v_star: &EquilibriumPath, t: f64) -> f64 {
    let c = medium.coeffs_at(t);
    let v = v_star.eval(t);
    (c.a1 - c.c1 * v) - (c.a2 - 2.0 * c.c2 * v + c.b2 * v)
}

/// Positive entire solution of `h' = κ(t) h + b2 v*`, i.e.
/// `h(t) = ∫_{-∞}^t b2 v* exp(∫_s^t κ) ds`.
pub fn aux_h(
    medium: &Medium,
    v_star: &EquilibriumPath,
    horizon: Horizon,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumPath> {
    let scan = GridPath::sample(|t| dominance_slack(medium, v_star, t), horizon, opts.dt);
    let slack = scan.min();
    if slack < 0.0 {
        return Err(Error::Hypothesis(format!(
            "dominance violated: min of a1 - c1 v* - (a2 - 2 c2 v* + b2 v*) is {slack}"
        )));
    }
    let k = |t: f64| -kappa(medium, v_star, t);
    let f = |t: f64| medium.channel(Channel::B2, t) * v_star.eval(t);
    let probe = v_star.horizon();
    let rate = least_mean(k, probe, opts.decay_window.min(probe.len()))?.value;
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Hypothesis("h-equation has no positive decay rate".into()));
    }
    // v* is clamped outside its grid, so the pullback needs v* on the pre-window too
    let (h, depth, gap) = converged_pullback(k, f, horizon, rate, opts)?;
    Ok(EquilibriumPath { path: h, depth, doubling_gap: gap })
}

/// Time derivative of `v*` from its own equation `v*' = v*(a2 - c2 v*)`.
#[inline]
pub fn v_star_rate(medium: &Medium, v_star: &EquilibriumPath, t: f64) -> f64 {
    let c = medium.coeffs_at(t);
    let v = v_star.eval(t);
    v * (c.a2 - c.c2 * v)
}

/// The path `λ(t) = a1 - c1 v*` and its least mean.
pub fn lambda_path(
    medium: &Medium,
    v_star: &EquilibriumPath,
    horizon: Horizon,
    r: f64,
) -> Result<MeanEstimate> {
    least_mean(|t| crate::dispersion::lambda_at(medium, v_star, t), horizon, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseMargins {
    pub b1_minus_c1: f64,
    pub b2_minus_c2: f64,
    pub b2_inf: f64,
    pub lambda_dominance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub persistence: bool,
    pub invasion: bool,
    pub dominance: bool,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub horizon: Horizon,
    pub mean_window: f64,
    pub lambda1_least: f64,
    pub lambda2_least: f64,
    pub invasion_rate: f64,
    pub resident_rate: f64,
    /// `inf a1 > sup c1 · sup a2 / inf c2`, the sufficient condition on ranges.
    pub range_condition: bool,
    pub pointwise_margins: PointwiseMargins,
    pub tolerance: f64,
    pub verdicts: Verdicts,
}

impl HypothesisReport {
    /// Refuses with a diagnostic naming the first failing hypothesis.
    pub fn require_all(&self) -> Result<()> {
        let v = self.verdicts;
        if !v.persistence {
            return Err(Error::Hypothesis(format!(
                "persistence fails: least means of a1, a2 are {}, {}",
                self.lambda1_least, self.lambda2_least
            )));
        }
        if !v.invasion {
            return Err(Error::Hypothesis(format!(
                "invasion fails: least mean of a1 - c1 v* = {}, greatest mean of a2 - b2 u* = {}",
                self.invasion_rate, self.resident_rate
            )));
        }
        if !v.dominance {
            return Err(Error::Hypothesis(format!(
                "dominance fails: margins {:?}",
                self.pointwise_margins
            )));
        }
        Ok(())
    }
}

fn verdicts(l1: f64, l2: f64, inst: f64, stab: f64, m: &PointwiseMargins, tol: f64) -> Verdicts {
    let persistence = l1 > tol && l2 > tol;
    let invasion = inst > tol && stab < -tol;
    let dominance = m.b1_minus_c1 >= -tol
        && m.b2_minus_c2 >= -tol
        && m.b2_inf > tol
        && m.lambda_dominance >= -tol;
    Verdicts { persistence, invasion, dominance, all: persistence && invasion && dominance }
}

/// Evaluates persistence, invasion and dominance on `horizon`; pointwise
/// conditions on a grid of step `scan_step`, mean conditions with window
/// `min(mean_window, |horizon|/2)`.
pub fn check_hypotheses(
    medium: &Medium,
    horizon: Horizon,
    scan_step: f64,
    opts: &EquilibriumOptions,
) -> Result<HypothesisReport> {
    assess_hypotheses(medium, horizon, scan_step, opts, None)
}

/// [`check_hypotheses`] reusing already computed `(u*, v*)` on `horizon`.
fn assess_hypotheses(
    medium: &Medium,
    horizon: Horizon,
    scan_step: f64,
    opts: &EquilibriumOptions,
    states: Option<(&EquilibriumPath, &EquilibriumPath)>,
) -> Result<HypothesisReport> {
    let r = opts.mean_window.min(0.5 * horizon.len());
    let tol = opts.tol;
    let l1 = least_mean(|t| medium.channel(Channel::A1, t), horizon, r)?.value;
    let l2 = least_mean(|t| medium.channel(Channel::A2, t), horizon, r)?.value;
    let (a1l, _) = medium.range(Channel::A1);
    let (_, c1m) = medium.range(Channel::C1);
    let (_, a2m) = medium.range(Channel::A2);
    let (c2l, _) = medium.range(Channel::C2);
    let range_condition = a1l > c1m * a2m / c2l;

    let mut margins = PointwiseMargins {
        b1_minus_c1: f64::INFINITY,
        b2_minus_c2: f64::INFINITY,
        b2_inf: f64::INFINITY,
        lambda_dominance: f64::NAN,
    };
    let n = (horizon.len() / scan_step).ceil().max(1.0) as usize;
    for k in 0..=n {
        let t = horizon.start + horizon.len() * k as f64 / n as f64;
        let c = medium.coeffs_at(t);
        margins.b1_minus_c1 = margins.b1_minus_c1.min(c.b1 - c.c1);
        margins.b2_minus_c2 = margins.b2_minus_c2.min(c.b2 - c.c2);
        margins.b2_inf = margins.b2_inf.min(c.b2);
    }

    let (inst, stab) = if l1 > 0.0 && l2 > 0.0 {
        let owned;
        let (u, v) = match states {
            Some(pair) => pair,
            None => {
                owned = (
                    logistic_equilibrium(medium, Channel::A1, Channel::B1, horizon, opts)?,
                    logistic_equilibrium(medium, Channel::A2, Channel::C2, horizon, opts)?,
                );
                (&owned.0, &owned.1)
            }
        };
        let inst = lambda_path(medium, v, horizon, r)?.value;
        let stab = mean_estimate(
            |t| medium.channel(Channel::A2, t) - medium.channel(Channel::B2, t) * u.eval(t),
            horizon,
            r,
            MeanMode::Greatest,
            MeanOptions::default(),
        )?
        .value;
        let mut dom = f64::INFINITY;
        for k in 0..=n {
            let t = horizon.start + horizon.len() * k as f64 / n as f64;
            dom = dom.min(dominance_slack(medium, v, t));
        }
        margins.lambda_dominance = dom;
        (inst, stab)
    } else {
        (f64::NAN, f64::NAN)
    };
    let verdicts = verdicts(l1, l2, inst, stab, &margins, tol);
    Ok(HypothesisReport {
        horizon,
        mean_window: r,
        lambda1_least: l1,
        lambda2_least: l2,
        invasion_rate: inst,
        resident_rate: stab,
        range_condition,
        pointwise_margins: margins,
        tolerance: tol,
        verdicts,
    })
}

/// Everything downstream modules need about the homogeneous states of one
/// medium on one horizon.
#[derive(Debug, Clone)]
pub struct Equilibria {
    pub horizon: Horizon,
    pub u_star: EquilibriumPath,
    pub v_star: EquilibriumPath,
    pub h: EquilibriumPath,
    pub lambda_least: f64,
    pub lambda_estimate: Option<MeanEstimate>,
    pub report: HypothesisReport,
    pub options: EquilibriumOptions,
}

impl Equilibria {
    /// Computes `u*`, `v*`, `h` on `horizon ∪ [0, mean_span]`, checks the
    /// hypotheses there and estimates λ̲ on `[0, mean_span]`.
    pub fn compute(medium: &Medium, horizon: Horizon, opts: &EquilibriumOptions) -> Result<Self> {
        let span = Horizon::new(0.0, opts.mean_span)?;
        let full = horizon.union(&span);
        let u_star = logistic_equilibrium(medium, Channel::A1, Channel::B1, full, opts)?;
        let v_star = logistic_equilibrium(medium, Channel::A2, Channel::C2, full, opts)?;
        let report = assess_hypotheses(medium, full, opts.dt, opts, Some((&u_star, &v_star)))?;
        report.require_all()?;
        let h = aux_h(medium, &v_star, full, opts)?;
        let est = lambda_path(medium, &v_star, span, opts.mean_window)?;
        if est.value.is_nan() || est.value <= 0.0 {
            return Err(Error::Hypothesis(format!("λ̲ = {} is not positive", est.value)));
        }
        Ok(Self {
            horizon: full,
            u_star,
            v_star,
            h,
            lambda_least: est.value,
            lambda_estimate: Some(est),
            report,
            options: *opts,
        })
    }

    /// Replaces the λ̲ estimate (used when two realizations must share the
    /// same deterministic λ̲, e.g. ω and θ_t ω).
    pub fn with_lambda_least(mut self, lambda: f64) -> Self {
        self.lambda_least = lambda;
        self.lambda_estimate = None;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ChannelSpec, CoefficientSet, MediumSpec};

    fn canonical() -> Medium {
        Medium::constant(CoefficientSet::CANONICAL).unwrap()
    }

    fn short_opts() -> EquilibriumOptions {
        EquilibriumOptions { mean_window: 20.0, mean_span: 40.0, ..Default::default() }
    }

    #[test]
    fn constant_logistic_equilibria() {
        let m = canonical();
        let h = Horizon::new(-10.0, 10.0).unwrap();
        let o = EquilibriumOptions::default();
        let u = logistic_equilibrium(&m, Channel::A1, Channel::B1, h, &o).unwrap();
        let v = logistic_equilibrium(&m, Channel::A2, Channel::C2, h, &o).unwrap();
        assert!(u.path.values.iter().all(|x| (x - 1.0).abs() < 1e-10));
        assert!(v.path.values.iter().all(|x| (x - 0.5).abs() < 1e-10));
        assert!(u.doubling_gap <= 2.0 * o.tol);
    }

    #[test]
    fn constant_h_is_steady_state() {
        let m = canonical();
        let h = Horizon::new(-10.0, 10.0).unwrap();
        let o = EquilibriumOptions::default();
        let v = logistic_equilibrium(&m, Channel::A2, Channel::C2, h, &o).unwrap();
        let hp = aux_h(&m, &v, h, &o).unwrap();
        for x in &hp.path.values {
            assert!((x - 0.4).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn negative_growth_refused() {
        let mut c = CoefficientSet::CANONICAL;
        c.a1 = -0.1;
        let m = Medium::constant(c).unwrap();
        let h = Horizon::new(0.0, 10.0).unwrap();
        let err = logistic_equilibrium(&m, Channel::A1, Channel::B1, h, &Default::default());
        assert!(matches!(err, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn decoupled_lambda_equals_growth_mean() {
        let mut c = CoefficientSet::CANONICAL;
        c.c1 = 1e-300;
        let spec = MediumSpec::constant(c).with_channel(
            Channel::A1,
            ChannelSpec::Periodic { mean: 1.0, amplitude: 0.5, frequency: 1.0, phase: 0.0 },
        );
        let m = Medium::new(spec).unwrap();
        let h = Horizon::new(0.0, 200.0).unwrap();
        let v = logistic_equilibrium(&m, Channel::A2, Channel::C2, h, &Default::default()).unwrap();
        let lam = lambda_path(&m, &v, h, 50.0).unwrap().value;
        let a1 = mean_estimate(
            |t| m.channel(Channel::A1, t),
            h,
            50.0,
            MeanMode::Least,
            MeanOptions::default(),
        )
        .unwrap()
        .value;
        assert!((lam - a1).abs() < 1e-12);
    }

    #[test]
    fn canonical_hypotheses_pass() {
        let m = canonical();
        let r =
            check_hypotheses(&m, Horizon::new(0.0, 40.0).unwrap(), 1e-2, &short_opts()).unwrap();
        assert!((r.invasion_rate - 0.75).abs() < 1e-9);
        assert!((r.resident_rate + 0.5).abs() < 1e-9);
        assert!((r.pointwise_margins.lambda_dominance - 0.75).abs() < 1e-9);
        assert!(r.verdicts.all, "{r:?}");
        assert!(r.require_all().is_ok());
    }

    #[test]
    fn weak_b2_fails_h2_and_weak_b1_fails_h3() {
        let mut c = CoefficientSet::CANONICAL;
        c.b2 = 0.3;
        let r = check_hypotheses(
            &Medium::constant(c).unwrap(),
            Horizon::new(0.0, 40.0).unwrap(),
            1e-2,
            &short_opts(),
        )
        .unwrap();
        assert!((r.resident_rate - 0.2).abs() < 1e-9);
        assert!(!r.verdicts.invasion && !r.verdicts.all);

        let mut c = CoefficientSet::CANONICAL;
        c.b1 = 0.4;
        let r = check_hypotheses(
            &Medium::constant(c).unwrap(),
            Horizon::new(0.0, 40.0).unwrap(),
            1e-2,
            &short_opts(),
        )
        .unwrap();
        assert!(!r.verdicts.dominance);
        assert!(r.require_all().unwrap_err().to_string().contains("dominance"));
    }

    #[test]
    fn bundle_for_canonical_medium() {
        let e =
            Equilibria::compute(&canonical(), Horizon::new(-30.0, 30.0).unwrap(), &short_opts())
                .unwrap();
        assert!((e.lambda_least - 0.75).abs() < 1e-12);
        assert!((e.h.eval(3.3) - 0.4).abs() < 1e-10);
        assert!(e.horizon.contains(-30.0) && e.horizon.contains(40.0));
    }
}
