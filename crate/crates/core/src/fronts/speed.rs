//! Level-set tracking, least mean speed of a front, tail/limit diagnostics,
//! and the spreading speed of compactly supported data.

use serde::{Deserialize, Serialize};

use super::{FrontProfile, WaveAnsatz};
use crate::dispersion::critical_speed;
use crate::env::Medium;
use crate::equilibria::Equilibria;
use crate::error::{invalid, Error, Result};
use crate::solver::{
    integrate, Cooperative, Frame, Ghosts, IntegratorOptions, LatticeState, States,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U,
    V,
}

/// First crossing of `level` by a non-increasing sampled profile, by linear
/// interpolation.
pub fn level_crossing(x: &[f64], values: &[f64], level: f64) -> Result<f64> {
    for j in 0..values.len().saturating_sub(1) {
        let (a, b) = (values[j], values[j + 1]);
        if a >= level && b < level {
            return Ok(x[j] + (a - level) / (a - b) * (x[j + 1] - x[j]));
        }
    }
    Err(Error::Numerical(format!(
        "no crossing of level {level} in the window (window too narrow?)"
    )))
}

/// `X(t)` where the component crosses `theta` times its invaded-state value.
pub fn front_positions(
    profile: &FrontProfile,
    equilibria: &Equilibria,
    theta: f64,
    which: Component,
) -> Result<Vec<(f64, f64)>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("level θ = {theta} must lie in (0, 1)")));
    }
    profile
        .slices
        .iter()
        .map(|s| {
            let (values, reference) = match which {
                Component::U => (&s.phi, equilibria.u_star.eval(s.t)),
                Component::V => (&s.psi, equilibria.v_star.eval(s.t)),
            };
            Ok((s.t, level_crossing(&s.x, values, theta * reference)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMeasurement {
    pub window_r: f64,
    /// Smallest average slope over windows of length at least `window_r`.
    pub estimate: f64,
    pub attained_on: (f64, f64),
    pub target: f64,
    pub relative_error: f64,
}

/// Least mean slope of a position series over windows `t - s ≥ r`.
pub fn least_mean_speed(series: &[(f64, f64)], r: f64, target: f64) -> Result<SpeedMeasurement> {
    let span = match (series.first(), series.last()) {
        (Some(a), Some(b)) => b.0 - a.0,
        _ => 0.0,
    };
    if r.is_nan() || r <= 0.0 || span + 1e-9 < 2.0 * r {
        return Err(invalid(format!("series span {span} is shorter than 2r = {}", 2.0 * r)));
    }
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for (i, &(s, xs)) in series.iter().enumerate() {
        for &(t, xt) in &series[i + 1..] {
            if t - s + 1e-9 < r {
                continue;
            }
            let slope = (xt - xs) / (t - s);
            if slope < best.0 {
                best = (slope, (s, t));
            }
        }
    }
    Ok(SpeedMeasurement {
        window_r: r,
        estimate: best.0,
        attained_on: best.1,
        target,
        relative_error: (best.0 - target).abs() / target.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub left_probe: f64,
    pub right_probe: f64,
    /// `sup_t |Φ̃(ξ_L, t) - u*(t)|` and the same for `Ψ̃` against `v*`.
    pub left_deviation_u: f64,
    pub left_deviation_v: f64,
    /// `sup_t Φ̃(ξ_R, t)`, `sup_t Ψ̃(ξ_R, t)`.
    pub right_value_u: f64,
    pub right_value_v: f64,
    /// `Φ̃ / e^{-μξ}` at `ξ_R / 2`, worst over time (tends to 1 in the tail).
    pub tail_ratio_u: f64,
    pub tail_ratio_v: f64,
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> Result<f64> {
    let n = x.len();
    if n < 2 || at < x[0] || at > x[n - 1] {
        return Err(Error::Numerical(format!("probe {at} lies outside the sampled window")));
    }
    let j = x.partition_point(|v| *v <= at).clamp(1, n - 1);
    let w = (at - x[j - 1]) / (x[j] - x[j - 1]);
    Ok(y[j - 1] * (1.0 - w) + y[j] * w)
}

/// Limits of the moving-frame profile at `ξ = ∓probe/μ`.
pub fn profile_limits(
    profile: &FrontProfile,
    ansatz: &WaveAnsatz,
    probe: f64,
) -> Result<LimitReport> {
    let mu = ansatz.mu;
    let (xl, xr) = (-probe / mu, probe / mu);
    let xm = 0.5 * xr;
    let eq = &ansatz.equilibria;
    let mut r = LimitReport {
        left_probe: xl,
        right_probe: xr,
        left_deviation_u: 0.0,
        left_deviation_v: 0.0,
        right_value_u: 0.0,
        right_value_v: 0.0,
        tail_ratio_u: 1.0,
        tail_ratio_v: 1.0,
    };
    let worst = |cur: f64, new: f64| if (new - 1.0).abs() > (cur - 1.0).abs() { new } else { cur };
    for s in &profile.slices {
        let xi = s.xi();
        let du = (interpolate(&xi, &s.phi, xl)? - eq.u_star.eval(s.t)).abs();
        let dv = (interpolate(&xi, &s.psi, xl)? - eq.v_star.eval(s.t)).abs();
        r.left_deviation_u = r.left_deviation_u.max(du);
        r.left_deviation_v = r.left_deviation_v.max(dv);
        r.right_value_u = r.right_value_u.max(interpolate(&xi, &s.phi, xr)?);
        r.right_value_v = r.right_value_v.max(interpolate(&xi, &s.psi, xr)?);
        let hat = (-mu * xm).exp();
        r.tail_ratio_u = worst(r.tail_ratio_u, interpolate(&xi, &s.phi, xm)? / hat);
        r.tail_ratio_v = worst(r.tail_ratio_v, interpolate(&xi, &s.psi, xm)? / hat);
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpreadOptions {
    /// Initial `u = u*(0)` on `|i| ≤ half_width`, zero elsewhere.
    pub half_width: usize,
    pub n_sites: usize,
    pub t_end: f64,
    pub sample_dt: f64,
    /// Edge level as a fraction of `min u*`.
    pub level_fraction: f64,
    /// Interior convergence is measured on `|i| ≤ fraction · c0 · t_end`.
    pub interior_fraction: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SpreadOptions {
    fn default() -> Self {
        Self {
            half_width: 5,
            n_sites: 4000,
            t_end: 300.0,
            sample_dt: 1.0,
            level_fraction: 0.01,
            interior_fraction: 0.5,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorReport {
    pub speed: f64,
    pub t: f64,
    /// `sup_{|i| ≤ speed·t} |u_i - u*| + |ṽ_i - v*|`.
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub level: f64,
    pub times: Vec<f64>,
    pub left_edge: Vec<f64>,
    pub right_edge: Vec<f64>,
    pub slope_right: f64,
    pub slope_left: f64,
    /// Standard error of the right slope.
    pub slope_stderr: f64,
    pub estimate: f64,
    pub c0: f64,
    pub relative_error: f64,
    pub interior: InteriorReport,
}

fn fit_slope(t: &[f64], x: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
    let stx: f64 = t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi - xm)).sum();
    let slope = stx / stt;
    let rss: f64 = t.iter().zip(x).map(|(ti, xi)| (xi - xm - slope * (ti - tm)).powi(2)).sum();
    let stderr = if n > 2.0 { (rss / (n - 2.0) / stt).sqrt() } else { f64::NAN };
    (slope, stderr)
}

/// Rightmost and leftmost crossings of `level` by `u`.
fn edges(s: &LatticeState, level: f64) -> Result<(f64, f64)> {
    let u = &s.u;
    let r = u.iter().rposition(|&v| v >= level);
    let l = u.iter().position(|&v| v >= level);
    match (l, r) {
        (Some(l), Some(r)) => {
            let right =
                if r + 1 < u.len() { s.x(r) + (u[r] - level) / (u[r] - u[r + 1]) } else { s.x(r) };
            let left = if l > 0 { s.x(l) - (u[l] - level) / (u[l] - u[l - 1]) } else { s.x(l) };
            Ok((left, right))
        }
        _ => Err(Error::Numerical(format!("solution fell below the edge level {level}"))),
    }
}

/// Spreads compactly supported data in the cooperative frame and fits the
/// asymptotic edge slope over the second half of the run.
pub fn spreading_speed(
    medium: &Medium,
    equilibria: &Equilibria,
    opts: &SpreadOptions,
) -> Result<SpreadReport> {
    if !equilibria.horizon.contains(0.0) || !equilibria.horizon.contains(opts.t_end) {
        return Err(invalid("equilibria must cover [0, t_end]"));
    }
    if !(opts.t_end > 0.0 && opts.sample_dt > 0.0) || opts.n_sites < 2 * opts.half_width + 2 {
        return Err(invalid("spreading run needs t_end, sample_dt > 0 and room around the box"));
    }
    let c0 = critical_speed(equilibria.lambda_least)?.c0;
    let u0 = equilibria.u_star.eval(0.0);
    let level = opts.level_fraction * equilibria.u_star.min();
    let half = (opts.n_sites / 2) as f64;
    let w = opts.half_width as f64;
    let s0 = LatticeState::from_fn(-half, opts.n_sites, 0.0, Frame::Cooperative, |x| {
        (if x.abs() <= w { u0 } else { 0.0 }, 0.0)
    });
    let system = Cooperative::new(
        medium,
        States { u_star: &equilibria.u_star, v_star: &equilibria.v_star },
        Ghosts::Fixed { left: (0.0, 0.0), right: (0.0, 0.0) },
    );
    let k = (opts.t_end / opts.sample_dt).round() as usize;
    let times: Vec<f64> = (1..=k).map(|j| opts.t_end * j as f64 / k as f64).collect();
    let traj = integrate(&system, &s0, &times, &opts.integrator)?;

    let mut left_edge = Vec::with_capacity(k);
    let mut right_edge = Vec::with_capacity(k);
    for s in &traj.snapshots {
        let (l, r) = edges(s, level)?;
        if r >= s.x(s.len() - 1) || l <= s.x(0) {
            return Err(Error::Numerical(format!(
                "spreading reached the window edge at t = {}",
                s.time
            )));
        }
        left_edge.push(l);
        right_edge.push(r);
    }
    let from = times.partition_point(|t| *t < 0.5 * opts.t_end);
    let (slope_right, slope_stderr) = fit_slope(&times[from..], &right_edge[from..]);
    let neg_left: Vec<f64> = left_edge[from..].iter().map(|x| -x).collect();
    let (slope_left, _) = fit_slope(&times[from..], &neg_left);

    let last = traj.last();
    let speed = opts.interior_fraction * c0;
    let reach = speed * last.time;
    let (us, vs) = (equilibria.u_star.eval(last.time), equilibria.v_star.eval(last.time));
    let sup_deviation = (0..last.len())
        .filter(|&i| last.x(i).abs() <= reach)
        .map(|i| (last.u[i] - us).abs() + (last.v[i] - vs).abs())
        .fold(0.0, f64::max);

    Ok(SpreadReport {
        level,
        times,
        left_edge,
        right_edge,
        slope_right,
        slope_left,
        slope_stderr,
        estimate: slope_right,
        c0,
        relative_error: (slope_right - c0).abs() / c0,
        interior: InteriorReport { speed, t: last.time, sup_deviation },
    })
}
