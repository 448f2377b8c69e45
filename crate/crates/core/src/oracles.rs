//! Slow, independent reference computations.
//!
//! Nothing here calls into the primary numerical paths: the right-hand sides,
//! scans and quadratures are transcribed separately so that a mistake in one
//! place does not silently confirm itself in the other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{CoefficientSet, Horizon, Medium};
use crate::error::{invalid, Error, Result};
use crate::solver::{Frame, LatticeState, StepStats, Trajectory};

/// Grid step of the brute-force dispersion scan.
pub const SCAN_STEP: f64 = 1e-6;

/// Closed-form homogeneous quantities for a constant medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    pub u_star: f64,
    pub v_star: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub h: f64,
    pub c0_scan: f64,
    pub mu_star_scan: f64,
}

pub fn constant_reference(c: CoefficientSet) -> Result<ClosedForms> {
    c.validate()?;
    let u_star = c.a1 / c.b1;
    let v_star = c.a2 / c.c2;
    let lambda = c.a1 - c.c1 * v_star;
    if lambda <= 0.0 {
        return Err(Error::Hypothesis(format!("invasion rate {lambda} is not positive")));
    }
    let kappa = (c.a2 - 2.0 * c.c2 * v_star) - lambda;
    let h = c.b2 * v_star / -kappa;
    let (mu_star_scan, c0_scan) = dispersion_scan(lambda)?;
    Ok(ClosedForms { u_star, v_star, lambda, kappa, h, c0_scan, mu_star_scan })
}

fn speed(lambda: f64, mu: f64) -> f64 {
    (mu.exp() + (-mu).exp() - 2.0 + lambda) / mu
}

/// Minimizes `(e^μ + e^{-μ} - 2 + λ)/μ` over a uniform μ-grid of step
/// [`SCAN_STEP`]; returns `(μ*, c0)`.
pub fn dispersion_scan(lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("scan needs a positive rate, got {lambda}")));
    }
    // the curve is unimodal; grow the scan range until it turns upward
    let mut upper = 4.0;
    while speed(lambda, upper) <= speed(lambda, upper - 0.01) {
        upper *= 2.0;
    }
    let n = (upper / SCAN_STEP) as usize;
    let (k, c) = (1..n + 1)
        .into_par_iter()
        .with_min_len(1 << 16)
        .map(|k| (k, speed(lambda, k as f64 * SCAN_STEP)))
        .reduce(|| (0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok((k as f64 * SCAN_STEP, c))
}

/// Roots of `c(μ) = γ` by plain bisection on either side of the scanned
/// minimum.
pub fn decay_roots_bisection(lambda: f64, gamma: f64) -> Result<(f64, f64)> {
    let (mu_star, c0) = dispersion_scan(lambda)?;
    if gamma <= c0 {
        return Err(Error::NoSupercriticalRoot(format!("γ = {gamma} ≤ c0 = {c0}")));
    }
    let g = |mu: f64| speed(lambda, mu) - gamma;
    let bisect = |mut lo: f64, mut hi: f64| {
        // g(lo) and g(hi) have opposite signs
        let s_lo = g(lo).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut left = mu_star;
    while g(left) < 0.0 {
        left *= 0.5;
    }
    let mut right = mu_star;
    while g(right) < 0.0 {
        right *= 2.0;
    }
    Ok((bisect(left, mu_star), bisect(mu_star, right)))
}

/// Sub-solution constants for a constant medium, where the compensating
/// path vanishes: `(μ, μ̃, K, d_ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantAnsatz {
    pub mu: f64,
    pub mu_tilde: f64,
    pub threshold: f64,
    pub d_omega: f64,
}

pub fn constant_ansatz(c: CoefficientSet, gamma: f64, delta: f64) -> Result<ConstantAnsatz> {
    let cf = constant_reference(c)?;
    let (mu, _) = decay_roots_bisection(cf.lambda, gamma)?;
    let m = (2.0 * mu).min(cf.mu_star_scan);
    let mu_tilde = m - 0.05 * (m - mu);
    let e = |z: f64| z.exp() + (-z).exp() - 2.0;
    let threshold = (mu * e(mu_tilde) - mu_tilde * e(mu)) / (mu_tilde - mu);
    let bmax = c.b1.max(c.b2);
    let d_omega = (bmax / cf.lambda * mu / (delta * (mu_tilde - mu))).max(1.0);
    Ok(ConstantAnsatz { mu, mu_tilde, threshold, d_omega })
}

/// `e^{-μx}` is an eigenfunction of the linearized invasion equation: its
/// amplitude grows by this factor over a time `t`.
pub fn linear_growth_factor(lambda: f64, mu: f64, t: f64) -> f64 {
    ((mu.exp() + (-mu).exp() - 2.0 + lambda) * t).exp()
}

/// Scalar logistic `u' = u(a - b u)` with constant coefficients.
pub fn logistic_closed_form(a: f64, b: f64, u0: f64, t: f64) -> f64 {
    let k = a / b;
    k * u0 * (a * t).exp() / (k + u0 * ((a * t).exp() - 1.0))
}

/// Composite trapezoid rule with step at most `step`.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, step: f64) -> f64 {
    let n = ((b - a).abs() / step).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// The model whose right-hand side the fixed-step oracle transcribes.
#[derive(Clone, Copy)]
pub enum OracleModel<'a> {
    Competition,
    /// Cooperative frame with the given `v*(t)`.
    Cooperative(&'a (dyn Fn(f64) -> f64 + Sync)),
}

/// Ghost values `t -> ((u_left, v_left), (u_right, v_right))`.
pub type OracleGhosts<'a> = &'a (dyn Fn(f64) -> ((f64, f64), (f64, f64)) + Sync);

fn oracle_rhs(
    model: OracleModel,
    medium: &Medium,
    ghosts: OracleGhosts,
    t: f64,
    y: &[f64],
    out: &mut [f64],
) {
    let n = y.len() / 2;
    let c = medium.coeffs_at(t);
    let (left, right) = ghosts(t);
    let at = |k: isize, comp: usize| -> f64 {
        if k < 0 {
            if comp == 0 {
                left.0
            } else {
                left.1
            }
        } else if k as usize >= n {
            if comp == 0 {
                right.0
            } else {
                right.1
            }
        } else {
            y[comp * n + k as usize]
        }
    };
    for i in 0..n as isize {
        let u = at(i, 0);
        let v = at(i, 1);
        let hu = at(i - 1, 0) + at(i + 1, 0) - 2.0 * u;
        let hv = at(i - 1, 1) + at(i + 1, 1) - 2.0 * v;
        let (fu, fv) = match model {
            OracleModel::Competition => {
                (u * (c.a1 - c.b1 * u - c.c1 * v), v * (c.a2 - c.b2 * u - c.c2 * v))
            }
            OracleModel::Cooperative(vs) => {
                // substitute v_orig = v* - v and differentiate v* - v_orig
                let vs = vs(t);
                let vo = vs - v;
                let dvs = vs * (c.a2 - c.c2 * vs);
                (u * (c.a1 - c.b1 * u - c.c1 * vo), dvs - vo * (c.a2 - c.b2 * u - c.c2 * vo))
            }
        };
        out[i as usize] = hu + fu;
        out[n + i as usize] = hv + fv;
    }
}

/// Classical RK4 at a fixed step no larger than `dt`, landing exactly on
/// every output time.
pub fn fixed_step_trajectory(
    model: OracleModel,
    medium: &Medium,
    ghosts: OracleGhosts,
    state0: &LatticeState,
    outputs: &[f64],
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt <= 1e-4) {
        return Err(invalid(format!("oracle step {dt} must lie in (0, 1e-4]")));
    }
    let frame = match model {
        OracleModel::Competition => Frame::Competition,
        OracleModel::Cooperative(_) => Frame::Cooperative,
    };
    if state0.frame != frame {
        return Err(invalid("oracle model and state frame differ"));
    }
    let n = state0.u.len();
    let mut y: Vec<f64> = state0.u.iter().chain(state0.v.iter()).copied().collect();
    let mut t = state0.time;
    let dim = 2 * n;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut stats = StepStats::default();
    let mut snapshots = Vec::with_capacity(outputs.len());
    for &to in outputs {
        if to < t {
            return Err(invalid("oracle outputs must be increasing"));
        }
        let steps = ((to - t) / dt).ceil() as usize;
        let h = if steps > 0 { (to - t) / steps as f64 } else { 0.0 };
        let t_start = t;
        for s in 0..steps {
            let ts = t_start + s as f64 * h;
            oracle_rhs(model, medium, ghosts, ts, &y, &mut k1);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            oracle_rhs(model, medium, ghosts, ts + 0.5 * h, &tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            oracle_rhs(model, medium, ghosts, ts + 0.5 * h, &tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] + h * k3[i];
            }
            oracle_rhs(model, medium, ghosts, ts + h, &tmp, &mut k4);
            for i in 0..dim {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            stats.accepted += 1;
            stats.rhs_evals += 4;
        }
        t = to;
        stats.h_min = if stats.h_min == 0.0 { h } else { stats.h_min.min(h) };
        stats.h_max = stats.h_max.max(h);
        let mut snap = state0.clone();
        snap.u = y[..n].to_vec();
        snap.v = y[n..].to_vec();
        snap.time = to;
        snapshots.push(snap);
    }
    Ok(Trajectory { snapshots, stats })
}

/// One row of [`window_mean_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMeans {
    pub r: f64,
    pub least: f64,
    pub greatest: f64,
}

/// Exhaustive least/greatest window means over every pair of nodes of a
/// uniform grid of step `step` (trapezoid prefix sums), for each `r`.
pub fn window_mean_scan(
    path: impl Fn(f64) -> f64,
    horizon: Horizon,
    rs: &[f64],
    step: f64,
) -> Result<Vec<WindowMeans>> {
    let n = (horizon.len() / step).round() as usize;
    if n < 2 {
        return Err(invalid("horizon too short for the scan step"));
    }
    let h = horizon.len() / n as f64;
    let f: Vec<f64> = (0..=n).map(|k| path(horizon.start + k as f64 * h)).collect();
    let mut prefix = vec![0.0; n + 1];
    for k in 1..=n {
        prefix[k] = prefix[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    }
    rs.iter()
        .map(|&r| {
            if !(r > 0.0 && r <= horizon.len()) {
                return Err(invalid(format!("window {r} outside (0, horizon length]")));
            }
            let min_gap = (r / h - 1e-9).ceil() as usize;
            let (least, greatest) = (0..=n.saturating_sub(min_gap))
                .into_par_iter()
                .map(|i| {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for j in (i + min_gap)..=n {
                        let m = (prefix[j] - prefix[i]) / ((j - i) as f64 * h);
                        lo = lo.min(m);
                        hi = hi.max(m);
                    }
                    (lo, hi)
                })
                .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
            Ok(WindowMeans { r, least, greatest })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_closed_forms() {
        let cf = constant_reference(CoefficientSet::CANONICAL).unwrap();
        assert_eq!((cf.u_star, cf.v_star, cf.lambda, cf.kappa), (1.0, 0.5, 0.75, -1.25));
        assert!((cf.h - 0.4).abs() < 1e-15);
        assert!((cf.c0_scan - 1.781).abs() < 1e-3);
        assert!((cf.mu_star_scan - 0.8018).abs() < 1e-3);
    }

    #[test]
    fn non_positive_rate_is_refused() {
        let c = CoefficientSet { c1: 2.0, ..CoefficientSet::CANONICAL };
        assert!(constant_reference(c).is_err());
    }

    #[test]
    fn bisection_roots_solve_the_speed_equation() {
        let (lo, hi) = decay_roots_bisection(0.75, 2.0).unwrap();
        assert!(lo < hi);
        assert!((speed(0.75, lo) - 2.0).abs() < 1e-12);
        assert!((speed(0.75, hi) - 2.0).abs() < 1e-12);
        assert!(decay_roots_bisection(0.75, 1.7).is_err());
    }

    #[test]
    fn rk4_logistic_and_zero_state() {
        let m = Medium::constant(CoefficientSet::CANONICAL).unwrap();
        let exact = |t: f64| logistic_closed_form(1.0, 1.0, 0.1, t);
        let ghosts = move |t: f64| ((exact(t), 0.0), (exact(t), 0.0));
        let s0 = LatticeState::from_fn(0.0, 1, 0.0, Frame::Competition, |_| (0.1, 0.0));
        let tr = fixed_step_trajectory(OracleModel::Competition, &m, &ghosts, &s0, &[5.0], 1e-4)
            .unwrap();
        assert!((tr.snapshots[0].u[0] - exact(5.0)).abs() < 1e-9);

        let vs = |_t: f64| 0.5;
        let zero = |_t: f64| ((0.0, 0.0), (0.0, 0.0));
        let s0 = LatticeState::zeros(0, 0.0, 5, 0.0, Frame::Cooperative);
        let tr = fixed_step_trajectory(OracleModel::Cooperative(&vs), &m, &zero, &s0, &[0.5], 1e-4)
            .unwrap();
        assert!(tr.snapshots[0].u.iter().chain(&tr.snapshots[0].v).all(|x| *x == 0.0));
    }

    #[test]
    fn window_scan_of_sine() {
        let h = Horizon::new(0.0, 40.0).unwrap();
        let rows = window_mean_scan(|t| 1.0 + 0.5 * t.sin(), h, &[10.0, 20.0], 1e-2).unwrap();
        for w in &rows {
            assert!(w.least <= 1.0 && w.least >= 1.0 - 1.0 / w.r);
            assert!(w.greatest >= 1.0 && w.greatest <= 1.0 + 1.0 / w.r);
        }
        assert!(rows[0].least <= rows[1].least);
    }

    #[test]
    fn trapezoid_integrates_sine_over_period() {
        let v = trapezoid(|t| 1.0 + 0.5 * t.sin(), 0.0, 2.0 * std::f64::consts::PI, 1e-4);
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }
}
