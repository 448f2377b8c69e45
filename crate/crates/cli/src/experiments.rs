//! One runner per experiment kind. Runners are pure: they return the output
//! files as bytes plus a verdict, and never touch the filesystem.

use lattice_fronts::dispersion::{critical_speed, decay_rates_with_report, wave_speed_curve};
use lattice_fronts::env::{Channel, Horizon, Medium};
use lattice_fronts::equilibria::{check_hypotheses, Equilibria};
use lattice_fronts::fronts::{
    construct_front, front_positions, least_mean_speed, profile_limits, spreading_speed, Component,
    FrontOptions, FrontRun,
};
use lattice_fronts::oracles::{constant_reference, decay_roots_bisection, dispersion_scan};
use lattice_fronts::solver::{integrate, Competition, Frame, Ghosts, LatticeState};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    CheckParams, DumpParams, Experiment, FrontParams, OracleParams, RunConfig, SimulateParams,
    SpeedParams,
};
use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn pass(detail: impl Into<String>) -> Self {
        Self { passed: true, detail: detail.into() }
    }
}

pub struct RunOutput {
    /// `(file name, contents)`, in a fixed order.
    pub files: Vec<(String, Vec<u8>)>,
    pub verdict: Verdict,
}

type Outcome = Result<RunOutput, Failure>;

pub fn run_experiment(cfg: &RunConfig) -> Outcome {
    let medium = Medium::new(cfg.medium.clone())?;
    match &cfg.experiment {
        Experiment::Check(p) => check(cfg, &medium, p),
        Experiment::Speed(p) => speed(cfg, &medium, p),
        Experiment::Simulate(p) => simulate(&medium, p),
        Experiment::Front(p) => front(cfg, &medium, p),
        Experiment::Spread(p) => {
            let h = Horizon::new(0.0, p.t_end)?;
            let eq = Equilibria::compute(&medium, h, &cfg.equilibrium)?;
            let report = spreading_speed(&medium, &eq, p)?;
            let rows = report.times.iter().enumerate().map(|(k, &t)| {
                vec![t, report.left_edge[k], report.right_edge[k], report.slope_right]
            });
            let csv = table(&["t", "left_edge", "right_edge", "slope_fit"], rows)?;
            let detail = format!(
                "spreading slope {:.6} vs c0 {:.6} (relative error {:.3e})",
                report.estimate, report.c0, report.relative_error
            );
            Ok(RunOutput {
                files: vec![("spread.csv".into(), csv), summary(&report)?],
                verdict: Verdict::pass(detail),
            })
        }
        Experiment::Oracle(p) => oracle(&medium, p),
        Experiment::MediumDump(p) => medium_dump(&medium, p),
    }
}

/// Shortest round-trip decimal; exponent form only for very small or large
/// magnitudes.
fn number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>, Failure> {
    let mut w =
        csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| number(x)))?;
    }
    w.into_inner().map_err(|e| Failure::io("csv output", e.into_error()))
}

fn summary(value: &impl Serialize) -> Result<(String, Vec<u8>), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Failure::io("summary", std::io::Error::other(e)))?;
    bytes.push(b'\n');
    Ok(("summary.json".into(), bytes))
}

fn check(cfg: &RunConfig, medium: &Medium, p: &CheckParams) -> Outcome {
    let h = Horizon::new(p.horizon.start, p.horizon.end)?;
    let report = check_hypotheses(medium, h, cfg.equilibrium.dt, &cfg.equilibrium)?;
    let verdict = match report.require_all() {
        Ok(()) => Verdict::pass("all hypotheses hold"),
        Err(e) => Verdict { passed: false, detail: e.to_string() },
    };
    Ok(RunOutput { files: vec![summary(&report)?], verdict })
}

fn speed(cfg: &RunConfig, medium: &Medium, p: &SpeedParams) -> Outcome {
    let h = Horizon::new(p.horizon.start, p.horizon.end)?;
    let eq = Equilibria::compute(medium, h, &cfg.equilibrium)?;
    let report = critical_speed(eq.lambda_least)?;
    let pairs = p
        .gammas
        .iter()
        .map(|&g| decay_rates_with_report(&report, g))
        .collect::<Result<Vec<_>, _>>()?;
    let n = 400;
    let rows = (1..=n)
        .map(|k| {
            let mu = 3.0 * report.mu_star * k as f64 / n as f64;
            wave_speed_curve(eq.lambda_least, mu).map(|c| vec![mu, c])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let csv = table(&["mu", "speed"], rows.into_iter())?;
    let detail = format!("c0 = {:.9}, mu* = {:.9}", report.c0, report.mu_star);
    let value = json!({ "critical": report, "decay_rates": pairs });
    Ok(RunOutput {
        files: vec![("dispersion.csv".into(), csv), summary(&value)?],
        verdict: Verdict::pass(detail),
    })
}

fn simulate(medium: &Medium, p: &SimulateParams) -> Outcome {
    let x_start = -((p.n_sites / 2) as f64);
    let s0 = LatticeState::from_fn(x_start, p.n_sites, 0.0, Frame::Competition, |x| {
        (if x.abs() <= p.half_width { p.u0 } else { 0.0 }, p.v0)
    });
    let ghost = (0.0, p.v0);
    let system = Competition::new(medium, Ghosts::Fixed { left: ghost, right: ghost });
    let tr = integrate(&system, &s0, &p.outputs, &p.integrator)?;
    let rows = tr.snapshots.iter().flat_map(|s| {
        (0..s.len())
            .map(move |i| vec![s.time, (s.first_index + i as i64) as f64, s.x(i), s.u[i], s.v[i]])
    });
    let csv = table(&["t", "i", "x", "u", "v"], rows)?;
    let value = json!({ "steps": tr.stats, "outputs": p.outputs });
    Ok(RunOutput {
        files: vec![("simulate.csv".into(), csv), summary(&value)?],
        verdict: Verdict::pass(format!("{} accepted steps", tr.stats.accepted)),
    })
}

fn front_profile_csv(run: &FrontRun) -> Result<Vec<u8>, Failure> {
    let a = &run.ansatz;
    let rows = run.profile.slices.iter().flat_map(|s| {
        (0..s.x.len()).map(move |j| {
            let (us, vs) = a.super_solution_at(s.x[j], s.t);
            let (ul, vl) = a.sub_solution_at(s.x[j], s.t);
            vec![s.t, s.x[j], s.x[j] - s.shift, s.phi[j], s.psi[j], us, vs, ul, vl]
        })
    });
    table(&["t", "x", "xi", "phi", "psi", "u_super", "v_super", "u_sub", "v_sub"], rows)
}

fn front(cfg: &RunConfig, medium: &Medium, p: &FrontParams) -> Outcome {
    let opts = FrontOptions {
        gamma: p.gamma,
        equilibrium: cfg.equilibrium,
        ansatz: p.ansatz,
        pullback: p.pullback.clone(),
    };
    let run = construct_front(medium, &opts, None)?;
    let (a, prof) = (&run.ansatz, &run.profile);
    let eq = &a.equilibria;

    let mut speed_rows = Vec::new();
    let mut speeds = Vec::new();
    for &level in &p.levels {
        let xu = front_positions(prof, eq, level, Component::U)?;
        let xv = front_positions(prof, eq, level, Component::V)?;
        for (k, &(t, x)) in xu.iter().enumerate() {
            speed_rows.push(vec![level, t, x, xv[k].1, a.speed.speed(t), a.shift(t)]);
        }
        let span = xu.last().map_or(0.0, |l| l.0) - xu[0].0;
        let r = p.speed_window.unwrap_or(0.5 * span);
        let measured = if r > 0.0 && span >= 2.0 * r {
            Some(least_mean_speed(&xu, r, p.gamma)?)
        } else {
            None
        };
        speeds.push(json!({ "level": level, "least_mean_speed": measured }));
    }
    let speed_csv = table(
        &["level", "t", "X_u", "X_v", "inst_speed", "integrated_speed"],
        speed_rows.into_iter(),
    )?;
    let sandwich = prof.sandwich(a, 0);
    let limits = profile_limits(prof, a, 40.0).ok();
    let value = json!({
        "ansatz": {
            "gamma": a.gamma, "c0": a.c0, "mu_star": a.mu_star, "mu": a.mu,
            "mu_tilde": a.mu_tilde, "delta": a.delta, "threshold": a.threshold,
            "k_hat": a.k_hat, "pointwise_margin": a.pointwise_margin, "a_sup": a.a_sup,
            "d_omega": a.d_omega, "d": a.d, "sigma": a.sigma,
            "lambda_least": eq.lambda_least,
        },
        "pullback": {
            "window": prof.window, "phases": prof.phases, "taus_used": prof.taus_used,
            "gaps": prof.gaps, "converged": prof.converged,
            "tau_violation": prof.tau_violation, "max_uptick": prof.max_uptick(),
        },
        "sandwich": sandwich,
        "limits": limits,
        "speeds": speeds,
    });
    let verdict = if prof.converged {
        Verdict::pass(format!("front converged (gap {:.3e})", prof.gap()))
    } else {
        Verdict {
            passed: false,
            detail: format!(
                "pullback did not converge: gap {:.3e} ≥ {:.1e}",
                prof.gap(),
                prof.tol_pb
            ),
        }
    };
    Ok(RunOutput {
        files: vec![
            ("front_profile.csv".into(), front_profile_csv(&run)?),
            ("front_speed.csv".into(), speed_csv),
            summary(&value)?,
        ],
        verdict,
    })
}

fn oracle(medium: &Medium, p: &OracleParams) -> Outcome {
    let mut rows = Vec::new();
    let mut agree = true;
    for &lambda in &p.lambdas {
        let fast = critical_speed(lambda)?;
        let (mu_scan, c0_scan) = dispersion_scan(lambda)?;
        let (dc, dm) = ((fast.c0 - c0_scan).abs(), (fast.mu_star - mu_scan).abs());
        agree &= dc < 1e-8 && dm < 1e-5;
        let mut row = vec![lambda, fast.c0, c0_scan, fast.mu_star, mu_scan, fast.foc_residual];
        if let Some(g) = p.gamma {
            let (lo, hi) =
                match (decay_rates_with_report(&fast, g), decay_roots_bisection(lambda, g)) {
                    (Ok(pair), Ok((blo, bhi))) => {
                        agree &=
                            (pair.mu_minus - blo).abs() < 1e-8 && (pair.mu_plus - bhi).abs() < 1e-8;
                        ((pair.mu_minus, blo), (pair.mu_plus, bhi))
                    }
                    _ => ((f64::NAN, f64::NAN), (f64::NAN, f64::NAN)),
                };
            row.extend([lo.0, lo.1, hi.0, hi.1]);
        }
        rows.push(row);
    }
    let mut header = vec!["lambda", "c0", "c0_scan", "mu_star", "mu_star_scan", "foc_residual"];
    if p.gamma.is_some() {
        header.extend(["mu_minus", "mu_minus_bisection", "mu_plus", "mu_plus_bisection"]);
    }
    let csv = table(&header, rows.into_iter())?;
    let closed =
        if medium.is_constant() { Some(constant_reference(medium.coeffs_at(0.0))?) } else { None };
    let value = json!({ "agree": agree, "closed_forms": closed });
    let verdict = if agree {
        Verdict::pass("solver and oracles agree")
    } else {
        Verdict { passed: false, detail: "solver and oracles disagree".into() }
    };
    Ok(RunOutput { files: vec![("oracle.csv".into(), csv), summary(&value)?], verdict })
}

fn medium_dump(medium: &Medium, p: &DumpParams) -> Outcome {
    let h = Horizon::new(p.horizon.start, p.horizon.end)?;
    let n = (h.len() / p.dt).round().max(1.0) as usize;
    let rows = (0..=n).map(|k| {
        let t = h.start + h.len() * k as f64 / n as f64;
        let mut row = vec![t];
        row.extend(Channel::ALL.iter().map(|&ch| medium.channel(ch, t)));
        row
    });
    let csv = table(&["t", "a1", "b1", "c1", "a2", "b2", "c2"], rows)?;
    Ok(RunOutput {
        files: vec![("medium.csv".into(), csv)],
        verdict: Verdict::pass(format!("{} samples", n + 1)),
    })
}

#[cfg(test)]
mod tests {
    use super::number;

    #[test]
    fn numbers_round_trip_without_locale_artifacts() {
        for x in [0.0, 1.5, -2.25e-12, 1e300, 0.1, 123456.789] {
            let s = number(x);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(number(1e-10), "1e-10");
    }
}
