use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Horizon, PrefixTable};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanMode {
    Least,
    Greatest,
}

/// Discretization of the window scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanOptions {
    /// Step of the prefix-integral grid.
    pub dt: f64,
    /// Window endpoints are taken every `stride` grid nodes where the stride
    /// keeps the number of candidate endpoints at or below this bound.
    pub max_points: usize,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self { dt: 1e-2, max_points: 4001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub window_r: f64,
    pub horizon: Horizon,
    pub mode: MeanMode,
    /// Extreme window `[s, t]` attaining `value`.
    pub attained_on: (f64, f64),
    /// For every scanned left endpoint `s`, the extreme average over the
    /// admissible right endpoints.
    pub trace: Vec<(f64, f64)>,
}

/// Least or greatest mean of `path` over windows `[s, t] ⊂ horizon` with
/// `t - s ≥ r`; endpoints live on the prefix grid.
pub fn mean_estimate(
    path: impl Fn(f64) -> f64,
    horizon: Horizon,
    r: f64,
    mode: MeanMode,
    opts: MeanOptions,
) -> Result<MeanEstimate> {
    check_window(horizon, r)?;
    let table = PrefixTable::build(path, horizon, opts.dt);
    scan_table(&table, horizon, r, mode, opts.max_points)
}

fn check_window(horizon: Horizon, r: f64) -> Result<()> {
    if r.is_nan() || r <= 0.0 {
        return Err(invalid(format!("mean window r = {r} must be positive")));
    }
    if r > horizon.len() {
        return Err(invalid(format!(
            "mean window r = {r} exceeds the horizon length {}",
            horizon.len()
        )));
    }
    Ok(())
}

/// Window scan on an existing table restricted to `horizon`.
pub fn scan_table(
    table: &PrefixTable,
    horizon: Horizon,
    r: f64,
    mode: MeanMode,
    max_points: usize,
) -> Result<MeanEstimate> {
    check_window(horizon, r)?;
    let grid = &table.prefix;
    let dt = grid.dt;
    let slack = 1e-9 * dt;
    let first = ((horizon.start - grid.t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let last = (((horizon.end - grid.t0) / dt + 1e-9).floor() as usize).min(grid.len() - 1);
    if last <= first {
        return Err(invalid("mean horizon lies outside the tabulated path"));
    }
    let n = last - first;
    let stride = n.div_ceil(max_points.max(2) - 1).max(1);
    let mut nodes: Vec<usize> = (first..=last).step_by(stride).collect();
    if *nodes.last().unwrap() != last {
        nodes.push(last);
    }
    let times: Vec<f64> = nodes.iter().map(|&k| grid.time(k)).collect();
    let prefix: Vec<f64> = nodes.iter().map(|&k| grid.values[k]).collect();
    let sign = match mode {
        MeanMode::Least => 1.0,
        MeanMode::Greatest => -1.0,
    };
    let per_start: Vec<Option<(f64, usize)>> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            for j in (i + 1)..nodes.len() {
                let len = times[j] - times[i];
                if len + slack < r {
                    continue;
                }
                let avg = (prefix[j] - prefix[i]) / len;
                if best.is_none_or(|(b, _)| sign * avg < sign * b) {
                    best = Some((avg, j));
                }
            }
            best
        })
        .collect();
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, cand) in per_start.iter().enumerate() {
        if let Some((v, j)) = *cand {
            trace.push((times[i], v));
            if best.is_none_or(|(b, _, _)| sign * v < sign * b) {
                best = Some((v, i, j));
            }
        }
    }
    let (value, i, j) = best.ok_or_else(|| invalid("no admissible window"))?;
    Ok(MeanEstimate { value, window_r: r, horizon, mode, attained_on: (times[i], times[j]), trace })
}
