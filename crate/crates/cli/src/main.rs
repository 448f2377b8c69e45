mod config;
mod experiments;
mod failure;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand};

use config::{load_config, RunConfig};
use failure::Failure;

/// Random transition fronts for two-species competition on the lattice.
#[derive(Debug, Parser)]
#[command(name = "lattice-fronts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output root; overrides `output_dir` from the config (default `runs`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replaces the medium seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing hypotheses on a horizon.
    Check(RunArgs),
    /// Least mean of λ, critical speed and decay rates.
    Speed(RunArgs),
    /// Integrate the competition system from box data.
    Simulate(RunArgs),
    /// Build a pullback front and measure it.
    Front(RunArgs),
    /// Spread compactly supported data and fit the edge speed.
    Spread(RunArgs),
    /// Compare the dispersion solver with brute-force references.
    Oracle(RunArgs),
    /// Tabulate the medium coefficients.
    MediumDump(RunArgs),
    /// Inventory the runs under an output root and verify their hashes.
    List {
        #[arg(long, value_name = "DIR", default_value = "runs")]
        out: PathBuf,
    },
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Speed(_) => "speed",
            Command::Simulate(_) => "simulate",
            Command::Front(_) => "front",
            Command::Spread(_) => "spread",
            Command::Oracle(_) => "oracle",
            Command::MediumDump(_) => "medium-dump",
            Command::List { .. } => "list",
        }
    }
}

fn prepare(kind: &str, args: &RunArgs) -> Result<(RunConfig, PathBuf), Failure> {
    let mut cfg = load_config(&args.config)?;
    if cfg.experiment.name() != kind {
        return Err(Failure::config(format!(
            "experiment.kind: config describes `{}` but `{kind}` was requested",
            cfg.experiment.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.medium.seed = seed;
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(Failure::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::config(format!("--threads: {e}")))?;
    }
    let root = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    Ok((cfg, root))
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    let kind = cli.command.kind();
    let args = match cli.command {
        Command::List { out } => {
            let inventory = store::list_runs(&out)?;
            let text = serde_json::to_string_pretty(&inventory)
                .map_err(|e| Failure::io("inventory", std::io::Error::other(e)))?;
            println!("{text}");
            return Ok(0);
        }
        Command::Check(a)
        | Command::Speed(a)
        | Command::Simulate(a)
        | Command::Front(a)
        | Command::Spread(a)
        | Command::Oracle(a)
        | Command::MediumDump(a) => a,
    };
    let (cfg, root) = prepare(kind, &args)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let output = experiments::run_experiment(&cfg)?;
    let (dir, manifest) = store::persist(&root, &cfg, output, started, clock.elapsed())?;
    let status = if manifest.verdict.passed { "pass" } else { "fail" };
    println!("{kind}: {status} — {}", manifest.verdict.detail);
    println!("run directory: {}", dir.display());
    // a completed check whose hypotheses fail still reports a refusal
    if !manifest.verdict.passed && kind == "check" {
        return Ok(Failure::HYPOTHESIS);
    }
    if !manifest.verdict.passed {
        return Ok(Failure::NUMERICAL);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
