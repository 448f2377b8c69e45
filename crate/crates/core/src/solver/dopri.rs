//! Dormand-Prince 5(4) with PI step-size control and the classical
//! fourth-order continuous extension for output between steps.

use serde::{Deserialize, Serialize};

use super::{Frame, LatticeState, LatticeSystem};
use crate::error::{invalid, Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Step cap before the coefficient-variation adjustment
    /// `max_step / (1 + variation_rate)`.
    pub max_step: f64,
    /// Interpolate outputs; otherwise steps are shortened to land on them.
    pub dense_output: bool,
    /// Admissible excursion outside the invariant region before aborting.
    pub tol_state: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 0.5,
            dense_output: true,
            tol_state: 1e-8,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_step > 0.0 && self.tol_state >= 0.0) {
            return Err(invalid("integrator tolerances and max_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub h_min: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<LatticeState>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &LatticeState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

struct Ctx<'a, S: LatticeSystem + ?Sized> {
    system: &'a S,
    n: usize,
    x0: f64,
    evals: usize,
}

impl<S: LatticeSystem + ?Sized> Ctx<'_, S> {
    fn f(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (du, dv) = dy.split_at_mut(self.n);
        self.system.rhs(t, self.x0, &y[..self.n], &y[self.n..], du, dv);
        self.evals += 1;
    }
}

/// Largest scaled component of `e`: every component meets its own
/// `atol + rtol |y|` bound (an RMS average would let a few active sites hide
/// behind many quiescent ones).
fn error_norm(y0: &[f64], y1: &[f64], e: &[f64], rtol: f64, atol: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y0.len() {
        let sk = atol + rtol * y0[i].abs().max(y1[i].abs());
        worst = worst.max((e[i] / sk).abs());
    }
    worst
}

/// Clips excursions below zero (and, in the cooperative frame, reports
/// excursions above `v*`); anything beyond `tol_state` aborts.
fn enforce(y: &mut [f64], n: usize, t: f64, v_upper: Option<f64>, tol: f64) -> Result<()> {
    for (i, val) in y.iter_mut().enumerate() {
        if !val.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at component {i}, t = {t}")));
        }
        if *val < 0.0 {
            if *val < -tol {
                return Err(Error::Numerical(format!(
                    "invariant violation: component {i} = {val:e} < 0 at t = {t}"
                )));
            }
            *val = 0.0;
        }
        if i >= n {
            if let Some(ub) = v_upper {
                if *val > ub + tol {
                    return Err(Error::Numerical(format!(
                        "invariant violation: v = {val} above v* = {ub} at t = {t}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn snapshot(template: &LatticeState, y: &[f64], t: f64, frame: Frame) -> LatticeState {
    let n = template.len();
    LatticeState {
        offset: template.offset,
        first_index: template.first_index,
        u: y[..n].to_vec(),
        v: y[n..].to_vec(),
        time: t,
        frame,
    }
}

/// Integrates `system` from `state0` and records snapshots at `outputs`
/// (strictly increasing, all `≥ state0.time`).
pub fn integrate<S: LatticeSystem + ?Sized>(
    system: &S,
    state0: &LatticeState,
    outputs: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    if state0.frame != system.frame() {
        return Err(invalid(format!(
            "state frame {:?} does not match system frame {:?}",
            state0.frame,
            system.frame()
        )));
    }
    if state0.u.len() != state0.v.len() || state0.is_empty() {
        return Err(invalid("state components must be non-empty and of equal length"));
    }
    let t0 = state0.time;
    if outputs.is_empty() || outputs[0] < t0 || outputs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("output times must be non-empty, increasing and not before t0"));
    }
    let n = state0.len();
    let dim = 2 * n;
    let frame = system.frame();
    let cap = opts.max_step / (1.0 + system.variation_rate());
    let mut ctx = Ctx { system, n, x0: state0.x(0), evals: 0 };

    let mut y: Vec<f64> = state0.u.iter().chain(&state0.v).copied().collect();
    enforce(&mut y, n, t0, system.v_upper(t0), opts.tol_state)?;
    let mut snapshots = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] == t0 {
        snapshots.push(snapshot(state0, &y, t0, frame));
        next_out += 1;
    }
    let t_final = *outputs.last().unwrap();
    let mut stats = StepStats { h_min: f64::INFINITY, ..Default::default() };
    if next_out == outputs.len() {
        return Ok(Trajectory { snapshots, stats });
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut t = t0;
    ctx.f(t, &y, &mut k1);

    // starting step: crude version of the usual two-evaluation estimate
    let mut h = {
        let d0 = error_norm(&y, &y, &y, opts.rtol, opts.atol);
        let d1 = error_norm(&y, &y, &k1, opts.rtol, opts.atol);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..dim {
            ytmp[i] = y[i] + h0 * k1[i];
        }
        ctx.f(t + h0, &ytmp, &mut k2);
        for i in 0..dim {
            err[i] = k2[i] - k1[i];
        }
        let d2 = error_norm(&y, &y, &err, opts.rtol, opts.atol) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
        (100.0 * h0).min(h1).min(cap)
    };

    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let mut facold: f64 = 1e-4;
    let mut reject_streak = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Numerical(format!("step budget exhausted at t = {t}")));
        }
        let remaining = t_final - t;
        h = h.min(cap).min(remaining);
        if !opts.dense_output {
            h = h.min(outputs[next_out] - t);
        }
        if h < 1e-12 * t.abs().max(1.0) {
            return Err(Error::Numerical(format!("step-size underflow (h = {h:e}) at t = {t}")));
        }

        for i in 0..dim {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        ctx.f(t + C2 * h, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        ctx.f(t + C3 * h, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        ctx.f(t + C4 * h, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        ctx.f(t + C5 * h, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if h == remaining { t_final } else { t + h };
        ctx.f(t_new, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        ctx.f(t_new, &ynew, &mut k7);
        for i in 0..dim {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&y, &ynew, &err, opts.rtol, opts.atol);
        let fac11 = e.powf(expo1);

        if e <= 1.0 {
            stats.accepted += 1;
            stats.h_min = stats.h_min.min(h);
            stats.h_max = stats.h_max.max(h);
            // outputs inside (t, t_new]
            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let to = outputs[next_out];
                let mut yo = if to == t_new {
                    ynew.clone()
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    (0..dim)
                        .map(|i| {
                            let ydiff = ynew[i] - y[i];
                            let bspl = h * k1[i] - ydiff;
                            let rc4 = ydiff - h * k7[i] - bspl;
                            let rc5 = h
                                * (D1 * k1[i]
                                    + D3 * k3[i]
                                    + D4 * k4[i]
                                    + D5 * k5[i]
                                    + D6 * k6[i]
                                    + D7 * k7[i]);
                            y[i] + theta * (ydiff + theta1 * (bspl + theta * (rc4 + theta1 * rc5)))
                        })
                        .collect()
                };
                enforce(&mut yo, n, to, system.v_upper(to), opts.tol_state)?;
                snapshots.push(snapshot(state0, &yo, to, frame));
                next_out += 1;
            }
            let clipped = ynew.iter().any(|v| *v < 0.0);
            enforce(&mut ynew, n, t_new, system.v_upper(t_new), opts.tol_state)?;
            std::mem::swap(&mut y, &mut ynew);
            t = t_new;
            if next_out == outputs.len() {
                break;
            }
            if clipped {
                ctx.f(t, &y, &mut k1);
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            let mut fac = fac11 / facold.powf(beta);
            fac = (fac / 0.9).clamp(0.2, 10.0);
            let mut h_new = h / fac;
            if reject_streak {
                h_new = h_new.min(h);
            }
            reject_streak = false;
            facold = e.max(1e-4);
            h = h_new;
        } else {
            stats.rejected += 1;
            reject_streak = true;
            h /= (fac11 / 0.9).min(5.0);
        }
    }
    stats.rhs_evals = ctx.evals;
    Ok(Trajectory { snapshots, stats })
}
