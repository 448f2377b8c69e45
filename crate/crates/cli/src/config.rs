//! Run configuration: a versioned JSON document describing the medium and
//! one experiment. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use lattice_fronts::env::{Horizon, MediumSpec};
use lattice_fronts::equilibria::EquilibriumOptions;
use lattice_fronts::fronts::{AnsatzOptions, PullbackOptions, SpreadOptions};
use lattice_fronts::solver::IntegratorOptions;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub medium: MediumSpec,
    #[serde(default)]
    pub equilibrium: EquilibriumOptions,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Check(CheckParams),
    Speed(SpeedParams),
    Simulate(SimulateParams),
    Front(FrontParams),
    Spread(SpreadOptions),
    Oracle(OracleParams),
    MediumDump(DumpParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Check(_) => "check",
            Experiment::Speed(_) => "speed",
            Experiment::Simulate(_) => "simulate",
            Experiment::Front(_) => "front",
            Experiment::Spread(_) => "spread",
            Experiment::Oracle(_) => "oracle",
            Experiment::MediumDump(_) => "medium-dump",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    pub horizon: Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedParams {
    pub horizon: Horizon,
    /// Supercritical speeds whose decay rates are reported.
    #[serde(default)]
    pub gammas: Vec<f64>,
}

/// Competition-frame run from box data: `u = u0` on `|x| ≤ half_width`,
/// `v = v0` everywhere, ghosts pinned to `(0, v0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub n_sites: usize,
    pub half_width: f64,
    pub u0: f64,
    pub v0: f64,
    pub outputs: Vec<f64>,
    #[serde(default)]
    pub integrator: IntegratorOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontParams {
    pub gamma: f64,
    #[serde(default)]
    pub ansatz: AnsatzOptions,
    #[serde(default)]
    pub pullback: PullbackOptions,
    /// Levels `θ` (fractions of `u*`, `v*`) whose crossings are tracked.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Window for the least mean speed; defaults to half the evaluated span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_window: Option<f64>,
}

fn default_levels() -> Vec<f64> {
    vec![0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpParams {
    pub horizon: Horizon,
    #[serde(default = "default_dump_dt")]
    pub dt: f64,
}

fn default_dump_dt() -> f64 {
    0.1
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, Failure> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Failure::config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::config(format!("{key}: {msg}"))
}

fn check_horizon(key: &str, h: &Horizon) -> Result<(), Failure> {
    Horizon::new(h.start, h.end).map(|_| ()).map_err(|e| bad(key, e))
}

fn positive(key: &str, x: f64) -> Result<(), Failure> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {x}")))
    }
}

fn increasing(key: &str, xs: &[f64]) -> Result<(), Failure> {
    if xs.is_empty() || xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().any(|x| !x.is_finite()) {
        return Err(bad(key, "must be a non-empty, strictly increasing list"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.version != SCHEMA_VERSION {
            return Err(bad(
                "version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version),
            ));
        }
        self.medium.validate().map_err(|e| bad("medium", e))?;
        positive("equilibrium.dt", self.equilibrium.dt)?;
        positive("equilibrium.tol", self.equilibrium.tol)?;
        positive("equilibrium.mean_window", self.equilibrium.mean_window)?;
        if self.equilibrium.mean_span < self.equilibrium.mean_window {
            return Err(bad("equilibrium.mean_span", "must be at least mean_window"));
        }
        match &self.experiment {
            Experiment::Check(p) => check_horizon("experiment.horizon", &p.horizon)?,
            Experiment::Speed(p) => {
                check_horizon("experiment.horizon", &p.horizon)?;
                for g in &p.gammas {
                    positive("experiment.gammas", *g)?;
                }
            }
            Experiment::Simulate(p) => {
                if p.n_sites == 0 {
                    return Err(bad("experiment.n_sites", "must be positive"));
                }
                if !(p.half_width >= 0.0 && p.u0 >= 0.0 && p.v0 >= 0.0) {
                    return Err(bad("experiment", "half_width, u0 and v0 must be non-negative"));
                }
                increasing("experiment.outputs", &p.outputs)?;
                if p.outputs[0] <= 0.0 {
                    return Err(bad("experiment.outputs", "output times must be positive"));
                }
                p.integrator.validate().map_err(|e| bad("experiment.integrator", e))?;
            }
            Experiment::Front(p) => {
                positive("experiment.gamma", p.gamma)?;
                if p.levels.is_empty() || p.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                    return Err(bad("experiment.levels", "levels must lie in (0, 1)"));
                }
                if let Some(r) = p.speed_window {
                    positive("experiment.speed_window", r)?;
                }
                increasing("experiment.pullback.taus", &p.pullback.taus)?;
                increasing("experiment.pullback.eval_times", &p.pullback.eval_times)?;
            }
            Experiment::Spread(p) => {
                positive("experiment.t_end", p.t_end)?;
                positive("experiment.sample_dt", p.sample_dt)?;
            }
            Experiment::Oracle(p) => {
                if p.lambdas.is_empty() {
                    return Err(bad("experiment.lambdas", "at least one rate is needed"));
                }
                for l in &p.lambdas {
                    positive("experiment.lambdas", *l)?;
                }
                if let Some(g) = p.gamma {
                    positive("experiment.gamma", g)?;
                }
            }
            Experiment::MediumDump(p) => {
                check_horizon("experiment.horizon", &p.horizon)?;
                positive("experiment.dt", p.dt)?;
            }
        }
        Ok(())
    }

    /// Tolerances that govern the selected experiment, for the manifest.
    pub fn tolerances(&self) -> Vec<(String, f64)> {
        let eq = &self.equilibrium;
        let mut t = vec![("equilibrium.tol".to_string(), eq.tol), ("equilibrium.dt".into(), eq.dt)];
        let integrator = |t: &mut Vec<(String, f64)>, prefix: &str, o: &IntegratorOptions| {
            t.push((format!("{prefix}.rtol"), o.rtol));
            t.push((format!("{prefix}.atol"), o.atol));
            t.push((format!("{prefix}.tol_state"), o.tol_state));
        };
        match &self.experiment {
            Experiment::Simulate(p) => integrator(&mut t, "integrator", &p.integrator),
            Experiment::Front(p) => {
                integrator(&mut t, "pullback.integrator", &p.pullback.integrator);
                t.push(("pullback.tol_pb".into(), p.pullback.tol_pb));
                t.push(("pullback.order_tol".into(), p.pullback.order_tol));
                t.push(("ansatz.delta".into(), p.ansatz.delta));
            }
            Experiment::Spread(p) => integrator(&mut t, "integrator", &p.integrator),
            Experiment::Oracle(_) => {
                t.push(("scan_step".into(), lattice_fronts::oracles::SCAN_STEP));
            }
            Experiment::Check(_) | Experiment::Speed(_) | Experiment::MediumDump(_) => {}
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "medium": {"kind": "constant", "channels": {
            "a1": {"type": "constant", "value": 1.0}, "b1": {"type": "constant", "value": 1.0},
            "c1": {"type": "constant", "value": 0.5}, "a2": {"type": "constant", "value": 0.5},
            "b2": {"type": "constant", "value": 1.0}, "c2": {"type": "constant", "value": 1.0}}},
        "experiment": {"kind": "check", "horizon": {"start": 0.0, "end": 10.0}}
    }"#;

    #[test]
    fn minimal_constant_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment.name(), "check");
        assert_eq!(cfg.equilibrium, EquilibriumOptions::default());
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        let top = MINIMAL.replacen("\"version\": 1,", "\"version\": 1, \"extra\": 3,", 1);
        assert!(parse_config(&top).unwrap_err().to_string().contains("extra"));
        let inner = MINIMAL.replace("\"kind\": \"check\",", "\"kind\": \"check\", \"gamma\": 2.0,");
        assert!(parse_config(&inner).is_err());
    }

    #[test]
    fn wrong_version_and_bad_gamma_rejected() {
        let v = MINIMAL.replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(parse_config(&v).unwrap_err().to_string().contains("version"));
        let front = MINIMAL.replace(
            r#""experiment": {"kind": "check", "horizon": {"start": 0.0, "end": 10.0}}"#,
            r#""experiment": {"kind": "front", "gamma": -1.0}"#,
        );
        let err = parse_config(&front).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("experiment.gamma"), "{err}");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_config("{\n  \"version\": 1,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
