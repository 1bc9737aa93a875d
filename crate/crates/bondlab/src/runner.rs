//! Experiment orchestration: dispatch, CSV emission, manifest, embedded
//! invariant checks. All Monte Carlo loops collect results in path order, so
//! outputs are byte-identical for a fixed (config, seed) regardless of the
//! worker count.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::completeness::replicate_claim;
use crate::config::ExperimentConfig;
use crate::counterexample::{dual_representation_report, expectation_gap};
use crate::error::{LabError, Result};
use crate::grid::TimeGrid;
use crate::incompleteness::{
    divergence_profile, sample_claims, sign_switching_admissibility, Check,
};
use crate::market::{fmt, read_initial_curve, simulate_forward_surface, write_surface_csv, SimulateOptions};
use crate::operator::{assemble_gamma, hs_norm, spectrum};
use crate::rng::CounterRng;
use crate::volatility::VolatilitySpec;

/// Record of one experiment run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub experiment: String,
    pub config_echo: String,
    pub version: &'static str,
    pub wall_seconds: f64,
    /// Emitted files with their data row counts.
    pub outputs: Vec<(String, usize)>,
    pub checks: Vec<Check>,
    pub summary: Vec<String>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("experiment: {}\n", self.experiment));
        s.push_str(&format!("version: {}\n", self.version));
        s.push_str(&format!("wall_seconds: {:.3}\n", self.wall_seconds));
        s.push_str("\n[config]\n");
        s.push_str(&self.config_echo);
        s.push_str("\n[outputs]\n");
        for (name, rows) in &self.outputs {
            s.push_str(&format!("{name}: {rows} rows\n"));
        }
        s.push_str("\n[checks]\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{} {} margin={}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                fmt(c.margin)
            ));
        }
        s.push_str("\n[summary]\n");
        for line in &self.summary {
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

fn check(name: &'static str, margin: f64) -> Check {
    Check { name, passed: margin >= 0.0, margin }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn initial_curve(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<Vec<f64>> {
    match &cfg.initial_curve {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| {
                LabError::Config(vec![format!("cannot open {}: {e}", path.display())])
            })?;
            read_initial_curve(std::io::BufReader::new(file), grid)
        }
        None => Ok(vec![cfg.initial_rate; grid.len()]),
    }
}

/// Runs the configured experiment, writes its CSVs and `manifest.txt` into
/// the output directory, and returns the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let mut outputs: Vec<(String, usize)> = Vec::new();
    let mut checks: Vec<Check> = Vec::new();
    let mut summary: Vec<String> = Vec::new();

    match cfg.experiment.as_str() {
        "counterexample" => run_counterexample(cfg, &mut outputs, &mut checks, &mut summary)?,
        "simulate" => run_simulate(cfg, &mut outputs, &mut checks, &mut summary)?,
        "spectrum" => run_spectrum(cfg, &mut outputs, &mut checks, &mut summary)?,
        "nonreplicable" => run_nonreplicable(cfg, &mut outputs, &mut checks, &mut summary)?,
        "divergence" => run_divergence(cfg, &mut outputs, &mut checks, &mut summary)?,
        "replicate" => run_replicate(cfg, &mut outputs, &mut checks, &mut summary)?,
        "bagchi-check" => run_admissibility(cfg, &mut outputs, &mut checks, &mut summary)?,
        other => {
            return Err(LabError::Config(vec![format!("unknown experiment `{other}`")]));
        }
    }

    let manifest = RunManifest {
        experiment: cfg.experiment.clone(),
        config_echo: cfg.echo(),
        version: env!("CARGO_PKG_VERSION"),
        wall_seconds: start.elapsed().as_secs_f64(),
        outputs,
        checks,
        summary,
    };
    write_file(&cfg.out, "manifest.txt", &manifest.render())?;
    Ok(manifest)
}

fn setup(cfg: &ExperimentConfig) -> Result<(TimeGrid, VolatilitySpec, Vec<f64>, CounterRng)> {
    let grid = cfg.grid()?;
    let spec = cfg.volatility_spec(&grid);
    let initial = initial_curve(cfg, &grid)?;
    Ok((grid, spec, initial, CounterRng::new(cfg.seed)))
}

fn run_simulate(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let (grid, spec, initial, rng) = setup(cfg)?;
    let surface = simulate_forward_surface(
        &spec,
        &grid,
        cfg.factors.min(spec.factors()),
        &initial,
        &rng,
        0,
        SimulateOptions::default(),
    )?;
    let mut buf = Vec::new();
    let rows = write_surface_csv(&surface, &mut buf)?;
    write_file(&cfg.out, "surface.csv", std::str::from_utf8(&buf).expect("utf8 csv"))?;
    outputs.push(("surface.csv".into(), rows));

    // entries below the diagonal never move after their maturity passes
    let mut freeze_gap = 0.0f64;
    for k in 0..grid.len() {
        for l in 0..=k {
            freeze_gap = freeze_gap.max((surface.f[k][l] - surface.f[l][l]).abs());
        }
    }
    checks.push(check("frozen_entries_exact", -freeze_gap));
    summary.push(format!("short_rate_terminal = {}", fmt(surface.short_rate(grid.steps()))));
    Ok(())
}

fn run_spectrum(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let (grid, spec, initial, rng) = setup(cfg)?;
    let n = cfg.factors.min(spec.factors());
    let surface =
        simulate_forward_surface(&spec, &grid, n, &initial, &rng, 0, SimulateOptions::default())?;
    let mut csv = String::from("k,i,lambda\n");
    let mut rows = 0;
    let mut monotone_margin = f64::INFINITY;
    let mut trace_rel = 0.0f64;
    for k in 0..grid.len() {
        let gamma = assemble_gamma(&surface, &spec, k)?;
        let sd = spectrum(&gamma)?;
        let hs2 = hs_norm(&gamma).powi(2);
        let sum2: f64 = sd.lambdas.iter().map(|l| l * l).sum();
        if hs2 > 0.0 {
            trace_rel = trace_rel.max((sum2 - hs2).abs() / hs2);
        }
        for (i, l) in sd.lambdas.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", k, i + 1, fmt(*l)));
            rows += 1;
        }
        for w in sd.lambdas.windows(2) {
            monotone_margin = monotone_margin.min(w[0] - w[1]);
        }
    }
    write_file(&cfg.out, "spectrum.csv", &csv)?;
    outputs.push(("spectrum.csv".into(), rows));
    checks.push(check("lambdas_nonincreasing", monotone_margin));
    checks.push(check("trace_identity", 1e-8 - trace_rel));
    summary.push(format!("max_trace_rel_error = {}", fmt(trace_rel)));
    Ok(())
}

fn run_nonreplicable(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let (grid, spec, initial, rng) = setup(cfg)?;
    let n = cfg.factors.min(spec.factors());
    let samples = sample_claims(&spec, &grid, n, &initial, &rng, cfg.paths, cfg.psi_mode)?;

    let mut csv = String::from("path,xi,tau,overshoot\n");
    for s in &samples {
        csv.push_str(&format!("{},{},{},{}\n", s.path, fmt(s.xi), fmt(s.tau), fmt(s.overshoot)));
    }
    write_file(&cfg.out, "claims.csv", &csv)?;
    outputs.push(("claims.csv".into(), samples.len()));

    let m = samples.len() as f64;
    let mean = samples.iter().map(|s| s.xi).sum::<f64>() / m;
    let var = samples.iter().map(|s| (s.xi - mean) * (s.xi - mean)).sum::<f64>()
        / (m - 1.0).max(1.0);
    let se = (var / m).sqrt();
    let bound_gap = samples
        .iter()
        .map(|s| s.xi.abs() - 1.0 - s.overshoot)
        .fold(f64::NEG_INFINITY, f64::max);
    let psi_cap = std::f64::consts::PI.powi(2) / 6.0;
    let psi_gap =
        samples.iter().map(|s| s.max_psi_norm_sq).fold(f64::NEG_INFINITY, f64::max) - psi_cap;

    checks.push(check("claim_bounded_by_barrier_plus_overshoot", -bound_gap));
    checks.push(check("integrand_norm_within_basel_cap", -psi_gap));
    checks.push(check("claim_mean_within_three_se", 3.0 * se - mean.abs()));
    summary.push(format!("mean_xi = {}", fmt(mean)));
    summary.push(format!("se_xi = {}", fmt(se)));
    let mut overshoots: Vec<f64> =
        samples.iter().filter(|s| s.tau < grid.horizon()).map(|s| s.overshoot).collect();
    overshoots.sort_by(f64::total_cmp);
    let median = overshoots.get(overshoots.len() / 2).copied().unwrap_or(0.0);
    summary.push(format!("median_overshoot_stopped = {}", fmt(median)));
    Ok(())
}

fn run_divergence(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let (grid, spec, initial, rng) = setup(cfg)?;
    let n = cfg.factors.min(spec.factors());
    let surface =
        simulate_forward_surface(&spec, &grid, n, &initial, &rng, 0, SimulateOptions::default())?;
    let gamma = assemble_gamma(&surface, &spec, 0)?;
    let sd = spectrum(&gamma)?;
    let ks: Vec<usize> = (1..=cfg.k_max).collect();
    let table = divergence_profile(&sd, &ks)?;

    let mut csv = String::from("K,min_norm_sq\n");
    for (k, v) in &table {
        csv.push_str(&format!("{},{}\n", k, fmt(*v)));
    }
    write_file(&cfg.out, "divergence.csv", &csv)?;
    outputs.push(("divergence.csv".into(), table.len()));

    let mut monotone = f64::INFINITY;
    for w in table.windows(2) {
        monotone = monotone.min(w[1].1 - w[0].1);
    }
    let lower =
        table.iter().map(|(k, v)| v - (*k as f64 - 1.0)).fold(f64::INFINITY, f64::min);
    checks.push(check("table_nondecreasing", monotone));
    checks.push(check("min_norm_at_least_k_minus_one", lower));
    summary.push(format!("min_norm_sq_at_k_max = {}", fmt(table.last().map(|t| t.1).unwrap_or(0.0))));
    Ok(())
}

fn run_replicate(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let (_, _, _, rng) = setup(cfg)?;
    let claim = cfg.claim()?;

    // refinement ladder: quarter, half, full resolution where divisible
    let mut ladder = Vec::new();
    if cfg.steps % 4 == 0 && cfg.steps >= 8 {
        ladder.push(cfg.steps / 4);
        ladder.push(cfg.steps / 2);
    }
    ladder.push(cfg.steps);

    let mut convergence = String::from("dt,rms_error\n");
    let mut rms_values = Vec::new();
    let mut lin_max = 0.0f64;
    let mut finest = None;
    for &steps in &ladder {
        let grid = TimeGrid::new(cfg.horizon, steps)?;
        let spec = cfg.volatility_spec(&grid);
        let n = cfg.factors.min(spec.factors());
        let initial = initial_curve(cfg, &grid)?;
        let report = replicate_claim(&spec, &grid, n, claim, &initial, &rng, cfg.paths)?;
        convergence.push_str(&format!("{},{}\n", fmt(grid.dt()), fmt(report.rms_error)));
        rms_values.push(report.rms_error);
        lin_max = lin_max.max(report.max_linearized_error);
        if steps == cfg.steps {
            finest = Some(report);
        }
    }
    let report = finest.expect("ladder includes the configured resolution");

    let mut csv = String::from("path,claim,hedge_terminal,residual\n");
    for h in &report.paths {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            h.path,
            fmt(h.claim),
            fmt(h.hedge_terminal),
            fmt(h.residual)
        ));
    }
    write_file(&cfg.out, "hedges.csv", &csv)?;
    outputs.push(("hedges.csv".into(), report.paths.len()));
    write_file(&cfg.out, "convergence.csv", &convergence)?;
    outputs.push(("convergence.csv".into(), ladder.len()));

    checks.push(check("linearized_identity", 1e-8 - lin_max));
    if rms_values.len() >= 2 && rms_values.iter().all(|v| *v > 0.0) {
        let worst_ratio = rms_values
            .windows(2)
            .map(|w| w[0] / w[1])
            .fold(f64::INFINITY, f64::min);
        checks.push(check("rms_error_shrinks_under_refinement", worst_ratio - 1.3));
        summary.push(format!("worst_refinement_ratio = {}", fmt(worst_ratio)));
    }
    summary.push(format!("rms_error = {}", fmt(report.rms_error)));
    summary.push(format!("max_linearized_error = {}", fmt(lin_max)));
    Ok(())
}

fn run_admissibility(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    let grid = cfg.grid()?;
    // this experiment is specifically about the sign-switching model
    let spec = crate::incompleteness::default_sign_switching(&grid, cfg.factors, cfg.beta);
    let initial = initial_curve(cfg, &grid)?;
    let rng = CounterRng::new(cfg.seed);
    let report =
        sign_switching_admissibility(&spec, &grid, cfg.factors, &initial, &rng, cfg.paths)?;

    let mut csv = String::from("check,passed,margin\n");
    for c in &report.checks {
        csv.push_str(&format!("{},{},{}\n", c.name, c.passed, fmt(c.margin)));
    }
    write_file(&cfg.out, "checks.csv", &csv)?;
    outputs.push(("checks.csv".into(), report.checks.len()));
    checks.extend(report.checks.iter().cloned());
    summary.push(format!("bound_constant = {}", fmt(report.bound_constant)));
    Ok(())
}

fn run_counterexample(
    cfg: &ExperimentConfig,
    outputs: &mut Vec<(String, usize)>,
    checks: &mut Vec<Check>,
    summary: &mut Vec<String>,
) -> Result<()> {
    if cfg.steps < 1000 {
        return Err(LabError::Config(vec![format!(
            "`steps` must be >= 1000 for the counterexample experiment, got {}",
            cfg.steps
        )]));
    }
    let rng = CounterRng::new(cfg.seed);
    let gap = expectation_gap(&rng, cfg.paths, cfg.steps, cfg.eps)?;

    let mut csv = String::from("path,tau,L,M1\n");
    for p in &gap.paths {
        csv.push_str(&format!("{},{},{},{}\n", p.path, fmt(p.tau), fmt(p.l), fmt(p.m1)));
    }
    write_file(&cfg.out, "paths.csv", &csv)?;
    outputs.push(("paths.csv".into(), gap.paths.len()));

    let e_inv = (-1.0f64).exp();
    checks.push(check("ci_upper_below_exp_minus_one", e_inv + 0.02 - gap.ci99.1));
    checks.push(check("mean_three_sigma_below_one", 1.0 - gap.mean_m1 - 3.0 * gap.se));
    checks.push(check("all_terminal_values_positive", gap.frac_m1_positive - 1.0));
    checks.push(check("log_exponent_below_minus_one", gap.frac_l_below - 0.99));

    let coarse = if cfg.steps % 10 == 0 { cfg.steps / 10 } else { cfg.steps / 2 };
    let dual = dual_representation_report(&rng, cfg.paths, coarse, cfg.steps, cfg.eps)?;
    checks.push(check(
        "bounded_integrand_control_is_martingale",
        3.0 * dual.control_se - (dual.control_mean - 1.0).abs(),
    ));
    summary.push(format!("mean_m1 = {}", fmt(gap.mean_m1)));
    summary.push(format!("ci99 = [{}, {}]", fmt(gap.ci99.0), fmt(gap.ci99.1)));
    summary.push(format!("representation_constants: x = {}, y = {}", fmt(dual.x), fmt(dual.y)));
    summary.push(format!("separation_in_se = {}", fmt(dual.separation_in_se)));
    summary.push(format!(
        "x_sq_integral_means: coarse = {}, fine = {}",
        fmt(dual.x_sq_means.0),
        fmt(dual.x_sq_means.1)
    ));
    Ok(())
}
