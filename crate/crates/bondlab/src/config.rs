//! Flat key = value experiment configuration.
//!
//! One key per line, `#` comments, unknown keys rejected by name and line.
//! Every field has a default so a minimal file (or none at all) runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::completeness::Claim;
use crate::error::{LabError, Result};
use crate::grid::TimeGrid;
use crate::incompleteness::{default_sign_switching, SpectrumMode};
use crate::volatility::VolatilitySpec;

pub const EXPERIMENTS: &[&str] = &[
    "simulate",
    "spectrum",
    "nonreplicable",
    "divergence",
    "replicate",
    "bagchi-check",
    "counterexample",
];

/// Volatility family selector; parameters live alongside in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolatilityKind {
    Constant,
    Sine,
    SignSwitching,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub horizon: f64,
    pub steps: usize,
    pub factors: usize,
    pub paths: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub volatility: VolatilityKind,
    pub sigma0: f64,
    /// Sine coefficients; empty means the default `1/j` family.
    pub gammas: Vec<f64>,
    /// Sign-switching base scale.
    pub beta: f64,
    pub psi_mode: SpectrumMode,
    pub claim: String,
    /// Largest K in the divergence table.
    pub k_max: usize,
    pub initial_rate: f64,
    pub initial_curve: Option<PathBuf>,
    /// Distance of the last geometric node from 1.
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "simulate".into(),
            horizon: 1.0,
            steps: 100,
            factors: 4,
            paths: 100,
            seed: 42,
            out: PathBuf::from("out"),
            volatility: VolatilityKind::Sine,
            sigma0: 0.2,
            gammas: Vec::new(),
            beta: 0.005,
            psi_mode: SpectrumMode::Pointwise,
            claim: "exp-martingale".into(),
            k_max: 10,
            initial_rate: 0.03,
            initial_curve: None,
            eps: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    /// Sine coefficients actually used (`1/j` unless overridden).
    pub fn sine_gammas(&self) -> Vec<f64> {
        if self.gammas.is_empty() {
            (1..=self.factors).map(|j| 1.0 / j as f64).collect()
        } else {
            self.gammas.clone()
        }
    }

    pub fn volatility_spec(&self, grid: &TimeGrid) -> VolatilitySpec {
        match self.volatility {
            VolatilityKind::Constant => VolatilitySpec::ConstantSingle { sigma0: self.sigma0 },
            VolatilityKind::Sine => VolatilitySpec::SineGaussian { gammas: self.sine_gammas() },
            VolatilityKind::SignSwitching => {
                default_sign_switching(grid, self.factors, self.beta)
            }
        }
    }

    pub fn claim(&self) -> Result<Claim> {
        Claim::from_name(&self.claim, self.factors).ok_or_else(|| {
            LabError::Config(vec![format!(
                "unknown claim `{}`; expected zero, wiener, wiener-sum or exp-martingale",
                self.claim
            )])
        })
    }

    /// Plain-text echo for the run manifest.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "factors = {}", self.factors);
        let _ = writeln!(s, "paths = {}", self.paths);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(
            s,
            "volatility = {}",
            match self.volatility {
                VolatilityKind::Constant => "constant",
                VolatilityKind::Sine => "sine",
                VolatilityKind::SignSwitching => "sign-switching",
            }
        );
        match self.volatility {
            VolatilityKind::Constant => {
                let _ = writeln!(s, "sigma0 = {}", self.sigma0);
            }
            VolatilityKind::Sine => {
                if !self.gammas.is_empty() {
                    let gs: Vec<String> = self.gammas.iter().map(|g| g.to_string()).collect();
                    let _ = writeln!(s, "gammas = {}", gs.join(","));
                }
            }
            VolatilityKind::SignSwitching => {
                let _ = writeln!(s, "beta = {}", self.beta);
            }
        }
        let _ = writeln!(
            s,
            "psi_mode = {}",
            if self.psi_mode == SpectrumMode::Pointwise { "pointwise" } else { "frozen" }
        );
        let _ = writeln!(s, "claim = {}", self.claim);
        let _ = writeln!(s, "k_max = {}", self.k_max);
        let _ = writeln!(s, "initial_rate = {}", self.initial_rate);
        if let Some(p) = &self.initial_curve {
            let _ = writeln!(s, "initial_curve = {}", p.display());
        }
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

fn parse_number<T: std::str::FromStr>(
    key: &str,
    value: &str,
    line: usize,
    errors: &mut Vec<String>,
) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errors.push(format!("line {line}: key `{key}` has unparseable value `{value}`"));
            None
        }
    }
}

/// Parses the flat key = value format, collecting every problem instead of
/// stopping at the first one.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut errors: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(format!("line {line}: expected `key = value`, got `{content}`"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            errors.push(format!("line {line}: duplicate key `{key}`"));
            continue;
        }
        match key {
            "experiment" => {
                if EXPERIMENTS.contains(&value) {
                    cfg.experiment = value.to_string();
                } else {
                    errors.push(format!(
                        "line {line}: unknown experiment `{value}`; expected one of {}",
                        EXPERIMENTS.join(", ")
                    ));
                }
            }
            "horizon" => {
                if let Some(v) = parse_number::<f64>(key, value, line, &mut errors) {
                    if v > 0.0 && v.is_finite() {
                        cfg.horizon = v;
                    } else {
                        errors.push(format!("line {line}: `horizon` must be > 0, got {v}"));
                    }
                }
            }
            "steps" => {
                if let Some(v) = parse_number::<usize>(key, value, line, &mut errors) {
                    if v >= 2 {
                        cfg.steps = v;
                    } else {
                        errors.push(format!("line {line}: `steps` must be >= 2, got {v}"));
                    }
                }
            }
            "factors" => {
                if let Some(v) = parse_number::<usize>(key, value, line, &mut errors) {
                    if v >= 1 {
                        cfg.factors = v;
                    } else {
                        errors.push(format!("line {line}: `factors` must be >= 1, got {v}"));
                    }
                }
            }
            "paths" => {
                if let Some(v) = parse_number::<u64>(key, value, line, &mut errors) {
                    if v >= 1 {
                        cfg.paths = v;
                    } else {
                        errors.push(format!("line {line}: `paths` must be >= 1, got {v}"));
                    }
                }
            }
            "seed" => {
                if let Some(v) = parse_number::<u64>(key, value, line, &mut errors) {
                    cfg.seed = v;
                }
            }
            "out" => cfg.out = PathBuf::from(value),
            "volatility" => match value {
                "constant" => cfg.volatility = VolatilityKind::Constant,
                "sine" => cfg.volatility = VolatilityKind::Sine,
                "sign-switching" => cfg.volatility = VolatilityKind::SignSwitching,
                _ => errors.push(format!(
                    "line {line}: unknown volatility `{value}`; expected constant, sine or sign-switching"
                )),
            },
            "sigma0" => {
                if let Some(v) = parse_number::<f64>(key, value, line, &mut errors) {
                    if v.is_finite() {
                        cfg.sigma0 = v;
                    } else {
                        errors.push(format!("line {line}: `sigma0` must be finite"));
                    }
                }
            }
            "gammas" => {
                let mut gs = Vec::new();
                let mut ok = true;
                for part in value.split(',') {
                    match part.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => gs.push(v),
                        _ => {
                            errors.push(format!(
                                "line {line}: `gammas` entry `{}` is not a finite number",
                                part.trim()
                            ));
                            ok = false;
                        }
                    }
                }
                if ok {
                    cfg.gammas = gs;
                }
            }
            "beta" => {
                if let Some(v) = parse_number::<f64>(key, value, line, &mut errors) {
                    if v > 0.0 && v <= 1.0 {
                        cfg.beta = v;
                    } else {
                        errors.push(format!("line {line}: `beta` must be in (0, 1], got {v}"));
                    }
                }
            }
            "psi_mode" => match value {
                "pointwise" => cfg.psi_mode = SpectrumMode::Pointwise,
                "frozen" => cfg.psi_mode = SpectrumMode::Frozen,
                _ => errors.push(format!(
                    "line {line}: unknown psi_mode `{value}`; expected pointwise or frozen"
                )),
            },
            "claim" => cfg.claim = value.to_string(),
            "k_max" => {
                if let Some(v) = parse_number::<usize>(key, value, line, &mut errors) {
                    if v >= 1 {
                        cfg.k_max = v;
                    } else {
                        errors.push(format!("line {line}: `k_max` must be >= 1, got {v}"));
                    }
                }
            }
            "initial_rate" => {
                if let Some(v) = parse_number::<f64>(key, value, line, &mut errors) {
                    if v.is_finite() {
                        cfg.initial_rate = v;
                    } else {
                        errors.push(format!("line {line}: `initial_rate` must be finite"));
                    }
                }
            }
            "initial_curve" => cfg.initial_curve = Some(PathBuf::from(value)),
            "eps" => {
                if let Some(v) = parse_number::<f64>(key, value, line, &mut errors) {
                    if v > 0.0 && v < 1.0 {
                        cfg.eps = v;
                    } else {
                        errors.push(format!("line {line}: `eps` must be in (0, 1), got {v}"));
                    }
                }
            }
            _ => errors.push(format!("line {line}: unknown key `{key}`")),
        }
    }

    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(LabError::Config(errors))
    }
}

/// Loads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}
