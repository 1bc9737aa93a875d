use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bondlab::config::{load_config, ExperimentConfig, EXPERIMENTS};
use bondlab::error::LabError;
use bondlab::runner::run_experiment;

/// Bond-market laboratory: simulation, spectra, hedging and counterexample
/// experiments with deterministic seeded output.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// One of: simulate, spectrum, nonreplicable, divergence, replicate,
    /// bagchi-check, counterexample
    experiment: String,
    /// Flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (overrides config and the LAB_SEED environment variable)
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path count
    #[arg(long)]
    paths: Option<u64>,
    /// Time steps
    #[arg(long)]
    steps: Option<usize>,
    /// Factor truncation
    #[arg(long)]
    factors: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if !EXPERIMENTS.contains(&args.experiment.as_str()) {
        return Err(LabError::Config(vec![format!(
            "unknown experiment `{}`; expected one of {}",
            args.experiment,
            EXPERIMENTS.join(", ")
        )]));
    }
    cfg.experiment = args.experiment.clone();
    if let Ok(env_seed) = std::env::var("LAB_SEED") {
        cfg.seed = env_seed.parse().map_err(|_| {
            LabError::Config(vec![format!("LAB_SEED must be an integer, got `{env_seed}`")])
        })?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.paths {
        cfg.paths = p;
    }
    if let Some(m) = args.steps {
        cfg.steps = m;
    }
    if let Some(n) = args.factors {
        cfg.factors = n;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(manifest) => {
            print!("{}", manifest.render());
            if manifest.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ LabError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
