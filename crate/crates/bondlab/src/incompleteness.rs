//! Constructive non-replicability experiments.
//!
//! From the spectrum of the diffusion operator a bounded claim is assembled
//! whose minimal-norm replicating portfolio blows up: pick indices where the
//! inverse singular value has grown past k, load coefficient 1/k there, and
//! stop the running integral at the first grid node past the unit barrier.
//! The module also hosts the sign-switching volatility model whose attainable
//! integrands stay inside a fixed L^2 ball.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::TimeGrid;
use crate::market::{discounted_curve, simulate_forward_surface, SimulateOptions};
use crate::operator::{assemble_gamma, spectrum, SpectralData, RANK_RTOL};
use crate::rng::CounterRng;
use crate::volatility::{h_norm_sq, PathState, VolatilitySpec};

/// Whether the spectral basis for the claim integrand is recomputed at every
/// step or taken from the time-zero operator throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    Pointwise,
    Frozen,
}

/// The sparse integrand built from a spectrum: coefficient `1/k` at the k-th
/// selected index, zero elsewhere.
#[derive(Debug, Clone)]
pub struct PsiTilde {
    /// Zero-based positions into the nonincreasing singular value ordering.
    pub indices: Vec<usize>,
    /// `coefficients[k-1] = 1/k`.
    pub coefficients: Vec<f64>,
    /// Dense vector in spectral coordinates.
    pub spectral: DVector<f64>,
}

impl PsiTilde {
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// The integrand rotated to natural l^2 coordinates.
    pub fn to_l2(&self, spectral: &SpectralData) -> DVector<f64> {
        spectral.from_spectral(&self.spectral)
    }
}

fn inverse_lambda(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / lambda
    }
}

/// Selects the index sequence `i_1 = inf{i : 1/lambda_i >= 1}`,
/// `i_{k+1} = inf{i > i_k : 1/lambda_i >= k}` and loads `1/k` at `i_k`.
/// Vanished singular values pass every threshold.
pub fn build_psi_tilde(spectral: &SpectralData) -> Result<PsiTilde> {
    let n = spectral.lambdas.len();
    let mut indices = Vec::new();
    let mut coefficients = Vec::new();
    let mut vector = DVector::zeros(n);
    let mut start = 0usize;
    loop {
        let k = indices.len() + 1;
        let threshold = (k as f64 - 1.0).max(1.0);
        let next = (start..n).find(|&i| inverse_lambda(spectral.lambdas[i]) >= threshold);
        match next {
            Some(i) => {
                indices.push(i);
                coefficients.push(1.0 / k as f64);
                vector[i] = 1.0 / k as f64;
                start = i + 1;
            }
            None => break,
        }
    }
    if indices.is_empty() {
        return Err(LabError::InsufficientTruncation { needed: 1, found: 0 });
    }
    Ok(PsiTilde { indices, coefficients, spectral: vector })
}

/// Minimal-norm solve of `Gamma' phi = target` in spectral coordinates.
#[derive(Debug, Clone)]
pub struct MinNormSolve {
    /// Spectral coefficients `<target, g^i> / lambda_i` on the range part.
    pub coefficients: DVector<f64>,
    pub norm_sq: f64,
    /// l^2 norm of the target component outside the operator range.
    pub residual: f64,
}

pub fn min_norm_portfolio(spectral: &SpectralData, target: &DVector<f64>) -> MinNormSolve {
    let in_spec = spectral.to_spectral(target);
    let cutoff = RANK_RTOL * spectral.lambdas.first().copied().unwrap_or(0.0);
    let mut coefficients = DVector::zeros(spectral.truncation());
    let mut norm_sq = 0.0;
    let mut residual_sq = 0.0;
    for i in 0..spectral.truncation() {
        if spectral.lambdas[i] > cutoff {
            coefficients[i] = in_spec[i] / spectral.lambdas[i];
            norm_sq += coefficients[i] * coefficients[i];
        } else {
            residual_sq += in_spec[i] * in_spec[i];
        }
    }
    MinNormSolve { coefficients, norm_sq, residual: residual_sq.sqrt() }
}

/// Cumulative squared portfolio norm needed to replicate the integrand
/// truncated to its first `K` selected indices, for each requested `K`.
pub fn divergence_profile(
    spectral: &SpectralData,
    k_values: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let psi = build_psi_tilde(spectral)?;
    let needed = k_values.iter().copied().max().unwrap_or(0);
    if psi.indices.len() < needed {
        return Err(LabError::InsufficientTruncation { needed, found: psi.indices.len() });
    }
    let mut cumulative = Vec::with_capacity(psi.indices.len());
    let mut acc = 0.0;
    for (k, &i) in psi.indices.iter().enumerate() {
        let ratio = psi.coefficients[k] * inverse_lambda(spectral.lambdas[i]);
        acc += ratio * ratio;
        cumulative.push(acc);
    }
    Ok(k_values.iter().map(|&k| (k, cumulative[k - 1])).collect())
}

/// One sampled claim path: stopped integral value, stopping node, overshoot
/// past the unit barrier, and the largest integrand norm seen along the way.
#[derive(Debug, Clone)]
pub struct ClaimSample {
    pub path: u64,
    pub xi: f64,
    pub tau: f64,
    pub overshoot: f64,
    pub max_psi_norm_sq: f64,
}

/// Left-point stopped integral of per-step integrands against the retained
/// Wiener increments. Stops at the first node where the running value leaves
/// (-1, 1); returns (value, stopping step, overshoot past 1).
pub fn stopped_integral(psi_rows: &[DVector<f64>], increments: &[Vec<f64>]) -> (f64, usize, f64) {
    let mut running = 0.0;
    for (k, dw) in increments.iter().enumerate() {
        let psi = &psi_rows[k];
        let mut step = 0.0;
        for (i, dwi) in dw.iter().enumerate() {
            step += psi[i] * dwi;
        }
        running += step;
        if running.abs() >= 1.0 {
            return (running, k + 1, running.abs() - 1.0);
        }
    }
    (running, increments.len(), 0.0)
}

/// Simulates one path and evaluates the constructed bounded claim on it.
pub fn nonreplicable_claim(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    initial: &[f64],
    rng: &CounterRng,
    path_index: u64,
    mode: SpectrumMode,
) -> Result<ClaimSample> {
    let surface = simulate_forward_surface(
        spec,
        grid,
        truncation,
        initial,
        rng,
        path_index,
        SimulateOptions::default(),
    )?;
    let increments = surface.increments.as_ref().expect("increments retained");

    let frozen = match mode {
        SpectrumMode::Frozen => {
            let gamma = assemble_gamma(&surface, spec, 0)?;
            let sd = spectrum(&gamma)?;
            let psi = build_psi_tilde(&sd)?;
            Some((psi.to_l2(&sd), psi.norm_sq()))
        }
        SpectrumMode::Pointwise => None,
    };

    let mut running = 0.0;
    let mut tau = grid.horizon();
    let mut overshoot = 0.0;
    let mut stopped = false;
    let mut max_norm_sq = 0.0f64;
    for (k, dw) in increments.iter().enumerate() {
        if stopped {
            break;
        }
        let (psi_l2, norm_sq) = match &frozen {
            Some((v, n)) => (v.clone(), *n),
            None => {
                let gamma = assemble_gamma(&surface, spec, k)?;
                let sd = spectrum(&gamma)?;
                let psi = build_psi_tilde(&sd)?;
                (psi.to_l2(&sd), psi.norm_sq())
            }
        };
        max_norm_sq = max_norm_sq.max(norm_sq);
        let step: f64 = dw.iter().enumerate().map(|(i, dwi)| psi_l2[i] * dwi).sum();
        running += step;
        if running.abs() >= 1.0 {
            tau = grid.node(k + 1);
            overshoot = running.abs() - 1.0;
            stopped = true;
        }
    }
    Ok(ClaimSample { path: path_index, xi: running, tau, overshoot, max_psi_norm_sq: max_norm_sq })
}

/// Samples the claim over a block of paths in parallel, in path order.
pub fn sample_claims(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    initial: &[f64],
    rng: &CounterRng,
    paths: u64,
    mode: SpectrumMode,
) -> Result<Vec<ClaimSample>> {
    (0..paths)
        .into_par_iter()
        .map(|p| nonreplicable_claim(spec, grid, truncation, initial, rng, p, mode))
        .collect()
}

/// Single named check with its signed margin (nonnegative means pass).
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub margin: f64,
}

impl Check {
    fn new(name: &'static str, margin: f64) -> Self {
        Self { name, passed: margin >= 0.0, margin }
    }
}

/// Outcome of the sign-switching admissibility run.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub checks: Vec<Check>,
    /// `horizon^2 * sum_{i<=N} 1/i^2`, the attainable-set radius.
    pub bound_constant: f64,
    pub paths: u64,
}

impl AdmissibilityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Partial sum `sum_{i=1..n} 1/i^2`.
pub fn basel_partial(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / (i as f64 * i as f64)).sum()
}

/// Default sign-switching model: base level `beta / (i sqrt(horizon))` for
/// factor i, switched off per maturity while the running base integral is
/// negative. `beta <= 1` keeps the per-factor H-norm within `1/i^2`; small
/// beta keeps simulated rates nonnegative at the grid scale.
pub fn default_sign_switching(grid: &TimeGrid, factors: usize, beta: f64) -> VolatilitySpec {
    let levels: Vec<f64> =
        (1..=factors).map(|i| beta / (i as f64 * grid.horizon().sqrt())).collect();
    VolatilitySpec::SignSwitching {
        base: Box::new(VolatilitySpec::constant_family(grid, &levels)),
    }
}

/// Test densities for the attainable-set inequality chain.
fn sample_densities(grid: &TimeGrid) -> Vec<Vec<f64>> {
    let nodes = grid.nodes();
    vec![
        vec![1.0; nodes.len()],
        nodes.clone(),
        nodes.iter().map(|t| (std::f64::consts::PI * t / grid.horizon()).sin()).collect(),
    ]
}

/// Verifies, on simulated paths of a sign-switching model, that rates stay
/// nonnegative, discounted bonds stay below one, the integrated-volatility
/// series stays inside the fixed ball, and the strategy inequality chain
/// holds for sample density-valued functionals.
pub fn sign_switching_admissibility(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    initial: &[f64],
    rng: &CounterRng,
    paths: u64,
) -> Result<AdmissibilityReport> {
    let base = match spec {
        VolatilitySpec::SignSwitching { base } => base.as_ref(),
        _ => {
            return Err(LabError::InvalidGrid(
                "admissibility report requires a sign-switching volatility".into(),
            ))
        }
    };

    // input rejection: per-factor H-norm of the base within 1/i^2 at every step
    let mut worst_base = f64::NEG_INFINITY;
    for i in 0..truncation {
        let cap = 1.0 / ((i + 1) as f64 * (i + 1) as f64);
        for k in 0..grid.len() {
            let hsq = h_norm_sq(base, grid, i, k, &PathState::Deterministic)?;
            worst_base = worst_base.max(hsq - cap);
            if hsq > cap * (1.0 + 1e-12) {
                return Err(LabError::BaseBoundViolated(format!(
                    "factor {} has |sigma|_H^2 = {hsq:.6e} > {cap:.6e} at step {k}",
                    i + 1
                )));
            }
        }
    }

    let bound_constant = grid.horizon().powi(2) * basel_partial(truncation);
    let densities = sample_densities(grid);
    let dt = grid.dt();

    struct PathStats {
        min_f: f64,
        max_p_hat: f64,
        max_b_series: f64,
        chain_margin: f64,
    }

    let stats: Vec<PathStats> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<PathStats> {
            let surface = simulate_forward_surface(
                spec,
                grid,
                truncation,
                initial,
                rng,
                p,
                SimulateOptions { retain_increments: false },
            )?;
            let mut min_f = f64::INFINITY;
            let mut max_p_hat = f64::NEG_INFINITY;
            let mut max_b_series = f64::NEG_INFINITY;
            // time integrals for the inequality chain, one pair per density
            let mut lhs = vec![0.0; densities.len()];
            for row in &surface.f {
                for v in row {
                    min_f = min_f.min(*v);
                }
            }
            for k in 0..grid.len() {
                let curve = discounted_curve(&surface, k);
                for v in &curve.discounted {
                    max_p_hat = max_p_hat.max(*v);
                }
                let gamma = assemble_gamma(&surface, spec, k)?;
                let mut series = 0.0;
                for i in 0..truncation {
                    let sq: Vec<f64> = gamma.b.column(i).iter().map(|b| b * b).collect();
                    series += grid.trapezoid(&sq, 0, grid.steps());
                }
                max_b_series = max_b_series.max(series);
                for (d, density) in densities.iter().enumerate() {
                    let mut shock_norm_sq = 0.0;
                    for i in 0..truncation {
                        let col: Vec<f64> =
                            gamma.matrix.column(i).iter().copied().collect();
                        let pairing = grid.trapezoid(
                            &density
                                .iter()
                                .zip(col.iter())
                                .map(|(h, g)| h * g)
                                .collect::<Vec<_>>(),
                            0,
                            grid.steps(),
                        );
                        shock_norm_sq += pairing * pairing;
                    }
                    lhs[d] += shock_norm_sq * dt;
                }
            }
            let mut chain_margin = f64::INFINITY;
            for (d, density) in densities.iter().enumerate() {
                let sq: Vec<f64> = density.iter().map(|h| h * h).collect();
                let rhs =
                    bound_constant * grid.trapezoid(&sq, 0, grid.steps()) * grid.horizon();
                chain_margin = chain_margin.min(rhs - lhs[d]);
            }
            Ok(PathStats { min_f, max_p_hat, max_b_series, chain_margin })
        })
        .collect::<Result<_>>()?;

    let min_f = stats.iter().map(|s| s.min_f).fold(f64::INFINITY, f64::min);
    let max_p_hat = stats.iter().map(|s| s.max_p_hat).fold(f64::NEG_INFINITY, f64::max);
    let max_b = stats.iter().map(|s| s.max_b_series).fold(f64::NEG_INFINITY, f64::max);
    let chain = stats.iter().map(|s| s.chain_margin).fold(f64::INFINITY, f64::min);

    let checks = vec![
        Check::new("base_h_norm_within_inverse_square", -worst_base),
        Check::new("nonnegative_rates", min_f + dt.sqrt()),
        Check::new("discounted_bond_below_one", 1.0 + 1e-12 - max_p_hat),
        Check::new("integrated_volatility_series_bound", bound_constant - max_b),
        Check::new("strategy_inequality_chain", chain),
    ];
    Ok(AdmissibilityReport { checks, bound_constant, paths })
}
