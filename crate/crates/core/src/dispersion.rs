//! Dispersion relation of the linearized invading equation,
//! `c(μ) = (e^μ + e^{-μ} - 2 + λ) / μ`, its minimum `c0` at `μ*`, the two
//! decay rates realizing a supercritical speed, and the time-dependent speed
//! `c(t; ω, μ)` driven by `λ(t) = a1 - c1 v*`.

use serde::{Deserialize, Serialize};

use crate::env::{adaptive_simpson, Horizon, Medium, PrefixTable, TOL_QUAD};
use crate::equilibria::EquilibriumPath;
use crate::error::{invalid, Error, Result};

pub const TOL_OPT: f64 = 1e-10;
const BRACKET: (f64, f64) = (1e-4, 20.0);
/// Relative back-off of μ̃ from `min(2μ, μ*)`.
pub const MU_TILDE_BACKOFF: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub lambda_least: f64,
    pub c0: f64,
    pub mu_star: f64,
    pub foc_residual: f64,
    pub bracket: (f64, f64),
    pub tol_opt: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPair {
    pub gamma: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
}

#[inline]
fn spread(mu: f64) -> f64 {
    mu.exp() + (-mu).exp() - 2.0
}

/// `(e^μ + e^{-μ} - 2 + λ) / μ`.
pub fn wave_speed_curve(lambda_least: f64, mu: f64) -> Result<f64> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(invalid(format!("decay rate μ = {mu} must be positive")));
    }
    Ok((spread(mu) + lambda_least) / mu)
}

#[inline]
fn curve(lambda: f64, mu: f64) -> f64 {
    (spread(mu) + lambda) / mu
}

/// First-order condition `μ(e^μ - e^{-μ}) - (e^μ + e^{-μ} - 2 + λ)`; strictly
/// increasing in μ with derivative `μ(e^μ + e^{-μ})`.
#[inline]
fn foc(lambda: f64, mu: f64) -> f64 {
    mu * (mu.exp() - (-mu).exp()) - (spread(mu) + lambda)
}

/// Critical speed `c0 = min_μ c(μ)` and its minimizer `μ*`.
pub fn critical_speed(lambda_least: f64) -> Result<SpeedReport> {
    if !(lambda_least > 0.0 && lambda_least.is_finite()) {
        return Err(Error::Hypothesis(format!(
            "least mean λ = {lambda_least} must be positive for a critical speed"
        )));
    }
    let (mut lo, mut hi) = BRACKET;
    // expand while the golden-section minimum sits at an endpoint
    let mut iterations = 0;
    let mut mu = loop {
        let m = golden_section(|x| curve(lambda_least, x), lo, hi, 1e-9, &mut iterations);
        let width = hi - lo;
        if m - lo < 1e-6 * width {
            lo *= 0.01;
        } else if hi - m < 1e-6 * width {
            hi *= 4.0;
        } else {
            break m;
        }
        if lo < 1e-300 || hi > 1e6 {
            return Err(Error::Numerical("critical-speed bracket expansion failed".into()));
        }
    };
    // Newton on the first-order condition, kept inside a shrinking bracket
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        iterations += 1;
        let g = foc(lambda_least, mu);
        if g < 0.0 {
            a = mu;
        } else {
            b = mu;
        }
        let dg = mu * (mu.exp() + (-mu).exp());
        let mut next = mu - g / dg;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - mu).abs() <= 1e-15 * mu {
            mu = next;
            break;
        }
        mu = next;
    }
    let foc_residual = foc(lambda_least, mu).abs();
    if foc_residual >= TOL_OPT {
        return Err(Error::Numerical(format!(
            "first-order condition residual {foc_residual:e} above {TOL_OPT:e}"
        )));
    }
    Ok(SpeedReport {
        lambda_least,
        c0: curve(lambda_least, mu),
        mu_star: mu,
        foc_residual,
        bracket: (lo, hi),
        tol_opt: TOL_OPT,
        iterations,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64, it: &mut usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol * (1.0 + c.abs()) {
        *it += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root of `c(μ) = γ` on a bracket where `c - γ` changes sign exactly once.
fn bracketed_root(lambda: f64, gamma: f64, mut a: f64, mut b: f64) -> f64 {
    let g = |m: f64| curve(lambda, m) - gamma;
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    // one guarded Newton polish: c'(μ) = (μ(e^μ - e^{-μ}) - spread - λ) / μ²
    let mut mu = 0.5 * (a + b);
    let d = foc(lambda, mu) / (mu * mu);
    if d != 0.0 {
        let next = mu - g(mu) / d;
        if g(next).abs() < g(mu).abs() {
            mu = next;
        }
    }
    mu
}

/// The two positive solutions `μ- < μ* < μ+` of `c(μ) = γ`.
pub fn decay_rates_for_speed(lambda_least: f64, gamma: f64) -> Result<DecayPair> {
    let report = critical_speed(lambda_least)?;
    decay_rates_with_report(&report, gamma)
}

pub fn decay_rates_with_report(report: &SpeedReport, gamma: f64) -> Result<DecayPair> {
    let lambda = report.lambda_least;
    if gamma.is_nan() || gamma <= report.c0 + TOL_OPT {
        return Err(Error::NoSupercriticalRoot(format!(
            "γ = {gamma} does not exceed c0 = {} by more than {TOL_OPT:e}",
            report.c0
        )));
    }
    let ms = report.mu_star;
    let mut lo = 0.5 * ms;
    while curve(lambda, lo) <= gamma {
        lo *= 0.5;
    }
    let mut hi = 2.0 * ms;
    while curve(lambda, hi) <= gamma {
        hi *= 2.0;
    }
    let mu_minus = bracketed_root(lambda, gamma, lo, ms);
    let mu_plus = bracketed_root(lambda, gamma, ms, hi);
    for (name, m) in [("μ-", mu_minus), ("μ+", mu_plus)] {
        let r = (curve(lambda, m) - gamma).abs();
        if r >= TOL_OPT {
            return Err(Error::Numerical(format!("{name} residual {r:e} above tolerance")));
        }
    }
    Ok(DecayPair { gamma, mu_minus, mu_plus })
}

/// μ̃ strictly inside `(μ, min(2μ, μ*))`.
pub fn mu_tilde(mu: f64, mu_star: f64) -> f64 {
    let cap = (2.0 * mu).min(mu_star);
    cap - MU_TILDE_BACKOFF * (cap - mu)
}

/// The constant `[μ(e^μ̃ + e^{-μ̃} - 2) - μ̃(e^μ + e^{-μ} - 2)] / (μ̃ - μ)`
/// that `(1-δ)λ + A'` has to dominate for the sub-solution.
pub fn sub_solution_threshold(mu: f64, mu_tilde: f64) -> f64 {
    (mu * spread(mu_tilde) - mu_tilde * spread(mu)) / (mu_tilde - mu)
}

/// `λ(t) = a1(θ_t ω) - c1(θ_t ω) v*(t; ω)`.
#[inline]
pub fn lambda_at(medium: &Medium, v_star: &EquilibriumPath, t: f64) -> f64 {
    let c = medium.coeffs_at(t);
    c.a1 - c.c1 * v_star.eval(t)
}

/// `c(t; ω, μ) = (e^μ + e^{-μ} - 2 + a1 - c1 v*) / μ`.
pub fn instantaneous_speed(medium: &Medium, v_star: &EquilibriumPath, mu: f64, t: f64) -> f64 {
    (spread(mu) + lambda_at(medium, v_star, t)) / mu
}

/// `∫_{t0}^{t1} c(s; ω, μ) ds` by adaptive quadrature.
pub fn speed_integral(medium: &Medium, v_star: &EquilibriumPath, mu: f64, t0: f64, t1: f64) -> f64 {
    adaptive_simpson(|s| instantaneous_speed(medium, v_star, mu, s), t0, t1, TOL_QUAD)
}

/// Tabulated `c(t)` and `S(t) = ∫_0^t c(s) ds` for fast repeated lookups.
#[derive(Debug, Clone)]
pub struct SpeedPath {
    pub mu: f64,
    table: PrefixTable,
    zero: f64,
}

impl SpeedPath {
    pub fn build(
        medium: &Medium,
        v_star: &EquilibriumPath,
        mu: f64,
        horizon: Horizon,
        dt: f64,
    ) -> Result<Self> {
        if !horizon.contains(0.0) {
            return Err(invalid("speed path horizon must contain t = 0"));
        }
        let table = PrefixTable::build(|s| instantaneous_speed(medium, v_star, mu, s), horizon, dt);
        let zero = table.prefix.eval(0.0);
        Ok(Self { mu, table, zero })
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.table.eval(t)
    }

    /// `S(t) = ∫_0^t c`.
    pub fn integrated(&self, t: f64) -> f64 {
        self.table.prefix.eval(t) - self.zero
    }

    pub fn horizon(&self) -> Horizon {
        self.table.samples.horizon()
    }

    pub fn table(&self) -> &PrefixTable {
        &self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from a 40-digit mpmath solve of the first-order condition.
    #[allow(clippy::excessive_precision)]
    const FIXTURES: [(f64, f64, f64); 4] = [
        (0.25, 0.485_699_413_146_223_2, 1.010_044_654_937_098_4),
        (0.75, 0.801_819_497_658_595_0, 1.781_081_826_706_645_7),
        (1.0, 0.907_103_293_576_289_9, 2.073_444_684_205_341),
        (3.0, 1.394_957_345_035_797, 3.786_958_856_704_918_3),
    ];

    #[test]
    fn curve_values() {
        assert!((wave_speed_curve(0.75, 1.0).unwrap() - 1.836_161_269_630_49).abs() < 1e-12);
        assert!((wave_speed_curve(0.75, 0.5).unwrap() - 2.010_503_860_825_52).abs() < 1e-12);
        assert!(wave_speed_curve(1.0, 1e-6).unwrap() > 1e5);
        assert!(wave_speed_curve(1.0, 0.0).is_err());
        assert!(wave_speed_curve(1.0, -1.0).is_err());
    }

    #[test]
    fn critical_speed_matches_fixtures() {
        for (lambda, mu_star, c0) in FIXTURES {
            let r = critical_speed(lambda).unwrap();
            assert!((r.mu_star - mu_star).abs() < 1e-12, "{lambda}: {}", r.mu_star);
            assert!((r.c0 - c0).abs() < 1e-13, "{lambda}: {}", r.c0);
            assert!(r.foc_residual < 1e-10);
        }
    }

    #[test]
    fn critical_speed_refuses_non_positive_lambda() {
        assert!(matches!(critical_speed(0.0), Err(Error::Hypothesis(_))));
        assert!(critical_speed(-0.2).is_err());
    }

    #[test]
    fn decay_pair_for_gamma_two() {
        let p = decay_rates_for_speed(0.75, 2.0).unwrap();
        assert!((p.mu_minus - 0.505_519_165_492_739_8).abs() < 1e-11);
        assert!((p.mu_plus - 1.226_863_989_341_123_6).abs() < 1e-11);
        assert!((wave_speed_curve(0.75, p.mu_minus).unwrap() - 2.0).abs() < TOL_OPT);
    }

    #[test]
    fn gamma_inside_guard_is_refused() {
        let c0 = critical_speed(0.75).unwrap().c0;
        let err = decay_rates_for_speed(0.75, c0 * (1.0 + 1e-12)).unwrap_err();
        assert!(matches!(err, Error::NoSupercriticalRoot(_)));
        assert!(err.to_string().contains("no supercritical root"));
        assert!(decay_rates_for_speed(0.75, 1.0).is_err());
    }

    #[test]
    fn mu_tilde_lies_strictly_inside() {
        let p = decay_rates_for_speed(0.75, 2.0).unwrap();
        let ms = critical_speed(0.75).unwrap().mu_star;
        let mt = mu_tilde(p.mu_minus, ms);
        assert!(mt > p.mu_minus && mt < (2.0 * p.mu_minus).min(ms));
        // δ → 0: λ itself dominates the threshold
        assert!(0.75 > sub_solution_threshold(p.mu_minus, mt));
    }
}
