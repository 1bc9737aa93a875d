//! Replication with generalized strategies in injective models.
//!
//! When the diffusion operator is injective at the working truncation, any
//! claim whose integrand is known in closed form can be hedged by reading the
//! curve increment back through the operator: the strategy acts on a curve v
//! as `<psi_t, Gamma_t^{-1} v>`. The claim library below carries its
//! integrands analytically, so hedging error is pure discretization error.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid::TimeGrid;
use crate::market::{discounted_curve, simulate_forward_surface, SimulateOptions};
use crate::operator::{assemble_gamma, gamma_adjoint, spectrum, GammaOperator, SpectralData, RANK_RTOL};
use crate::rng::CounterRng;
use crate::volatility::{eval_volatility, PathState, VolatilitySpec};

/// Claims with analytically known martingale integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Claim {
    /// Constant claim, zero integrand.
    Zero,
    /// `W_factor(S)`, constant unit integrand on one factor.
    WienerTerminal { factor: usize },
    /// `sum_{i < factors} W_i(S)`.
    WienerSum { factors: usize },
    /// `exp(a W_factor(S) - a^2 S / 2)`, integrand `a xi_t e_factor`.
    ExpMartingale { a: f64, factor: usize },
}

impl Claim {
    pub fn name(&self) -> &'static str {
        match self {
            Claim::Zero => "zero",
            Claim::WienerTerminal { .. } => "wiener",
            Claim::WienerSum { .. } => "wiener-sum",
            Claim::ExpMartingale { .. } => "exp-martingale",
        }
    }

    /// Library lookup for the CLI; `factors` sizes the sum variant.
    pub fn from_name(name: &str, factors: usize) -> Option<Claim> {
        match name {
            "zero" => Some(Claim::Zero),
            "wiener" => Some(Claim::WienerTerminal { factor: 0 }),
            "wiener-sum" => Some(Claim::WienerSum { factors }),
            "exp-martingale" => Some(Claim::ExpMartingale { a: 0.5, factor: 0 }),
            _ => None,
        }
    }

    /// Smallest truncation the claim is measurable against.
    pub fn min_factors(&self) -> usize {
        match self {
            Claim::Zero => 1,
            Claim::WienerTerminal { factor } | Claim::ExpMartingale { factor, .. } => factor + 1,
            Claim::WienerSum { factors } => (*factors).max(1),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Claim::Zero | Claim::WienerTerminal { .. } | Claim::WienerSum { .. } => 0.0,
            Claim::ExpMartingale { .. } => 1.0,
        }
    }

    pub fn variance(&self, horizon: f64) -> f64 {
        match self {
            Claim::Zero => 0.0,
            Claim::WienerTerminal { .. } => horizon,
            Claim::WienerSum { factors } => *factors as f64 * horizon,
            Claim::ExpMartingale { a, .. } => (a * a * horizon).exp() - 1.0,
        }
    }

    /// Terminal value from a Wiener path `w[k][i]`.
    pub fn terminal(&self, w: &[Vec<f64>], grid: &TimeGrid) -> f64 {
        let last = &w[grid.steps()];
        match self {
            Claim::Zero => 0.0,
            Claim::WienerTerminal { factor } => last[*factor],
            Claim::WienerSum { factors } => last[..*factors].iter().sum(),
            Claim::ExpMartingale { a, factor } => {
                (a * last[*factor] - 0.5 * a * a * grid.horizon()).exp()
            }
        }
    }

    /// Integrand `psi_{t_k}` in l^2 coordinates, measurable at `t_k`.
    pub fn integrand(&self, k: usize, w: &[Vec<f64>], grid: &TimeGrid, n: usize) -> DVector<f64> {
        let mut psi = DVector::zeros(n);
        match self {
            Claim::Zero => {}
            Claim::WienerTerminal { factor } => psi[*factor] = 1.0,
            Claim::WienerSum { factors } => {
                for i in 0..*factors {
                    psi[i] = 1.0;
                }
            }
            Claim::ExpMartingale { a, factor } => {
                let xi_t = (a * w[k][*factor] - 0.5 * a * a * grid.node(k)).exp();
                psi[*factor] = a * xi_t;
            }
        }
        psi
    }

    /// Projection onto the first `n_prime` factors (conditional expectation),
    /// evaluated on the sampled path.
    pub fn project_terminal(&self, w: &[Vec<f64>], grid: &TimeGrid, n_prime: usize) -> f64 {
        match self {
            Claim::Zero => 0.0,
            Claim::WienerTerminal { factor } => {
                if *factor < n_prime {
                    self.terminal(w, grid)
                } else {
                    0.0
                }
            }
            Claim::WienerSum { factors } => {
                w[grid.steps()][..(*factors).min(n_prime)].iter().sum()
            }
            Claim::ExpMartingale { factor, .. } => {
                if *factor < n_prime {
                    self.terminal(w, grid)
                } else {
                    1.0
                }
            }
        }
    }

    /// Analytic value of `E[(xi_{n'} - xi)^2]`.
    pub fn projection_gap(&self, horizon: f64, n_prime: usize) -> f64 {
        match self {
            Claim::Zero => 0.0,
            Claim::WienerTerminal { factor } | Claim::ExpMartingale { factor, .. } => {
                if *factor < n_prime {
                    0.0
                } else {
                    self.variance(horizon)
                }
            }
            Claim::WienerSum { factors } => {
                horizon * (factors.saturating_sub(n_prime)) as f64
            }
        }
    }
}

/// Gram matrix of the volatility family over maturities in `[t, horizon]`.
pub fn sine_gaussian_orthogonality(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    t: f64,
) -> Result<DMatrix<f64>> {
    let n = spec.factors();
    let k0 = ((t / grid.dt()).round() as usize).min(grid.steps());
    let state = PathState::Deterministic;
    let mut samples = vec![vec![0.0; grid.len()]; n];
    for (i, row) in samples.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            *v = eval_volatility(spec, grid, i, t, grid.node(l), &state)?;
        }
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let prod: Vec<f64> =
                samples[i].iter().zip(samples[j].iter()).map(|(a, b)| a * b).collect();
            let v = grid.trapezoid(&prod, k0, grid.steps());
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Smallest singular value at truncation; above the rank cutoff it certifies
/// injectivity of the discretized operator.
pub fn injectivity_margin(spectral: &SpectralData) -> f64 {
    spectral.lambdas.last().copied().unwrap_or(0.0)
}

/// The functional `v -> <psi, Gamma^{-1} v>` stored as spectral weights.
#[derive(Debug, Clone)]
pub struct GeneralizedStrategy {
    /// `<psi, g^i> / lambda_i^2` on range directions, zero on null directions.
    weights: DVector<f64>,
    pub rank: usize,
}

impl GeneralizedStrategy {
    /// Least-squares variant: null directions of the operator are dropped
    /// rather than rejected. Used inside hedging loops where the trailing
    /// steps lose rank as maturities expire.
    pub fn pseudo(spectral: &SpectralData, psi: &DVector<f64>) -> GeneralizedStrategy {
        let c = spectral.to_spectral(psi);
        let cutoff = RANK_RTOL * spectral.lambdas.first().copied().unwrap_or(0.0);
        let mut weights = DVector::zeros(spectral.truncation());
        for i in 0..spectral.truncation() {
            if spectral.lambdas[i] > cutoff {
                weights[i] = c[i] / (spectral.lambdas[i] * spectral.lambdas[i]);
            }
        }
        GeneralizedStrategy { weights, rank: spectral.rank }
    }

    /// Evaluates the functional on a curve.
    pub fn apply(
        &self,
        gamma: &GammaOperator,
        spectral: &SpectralData,
        curve: &[f64],
    ) -> Result<f64> {
        let adj = gamma_adjoint(gamma, curve)?;
        Ok(self.weights.dot(&spectral.to_spectral(&adj)))
    }
}

/// Strict constructor: errors when the operator is rank deficient at
/// truncation, naming the flat directions.
pub fn build_generalized_strategy(
    spectral: &SpectralData,
    psi: &DVector<f64>,
) -> Result<GeneralizedStrategy> {
    if spectral.rank < spectral.truncation() {
        let deficient: Vec<String> =
            (spectral.rank..spectral.truncation()).map(|i| format!("{}", i + 1)).collect();
        return Err(LabError::NotInjective(format!(
            "singular directions {} are below the rank cutoff",
            deficient.join(", ")
        )));
    }
    Ok(GeneralizedStrategy::pseudo(spectral, psi))
}

/// One hedged path.
#[derive(Debug, Clone)]
pub struct HedgePath {
    pub path: u64,
    pub claim: f64,
    pub hedge_terminal: f64,
    pub residual: f64,
}

/// Outcome of a replication run.
#[derive(Debug, Clone)]
pub struct ReplicationReport {
    pub paths: Vec<HedgePath>,
    pub rms_error: f64,
    /// Worst per-step gap between the strategy applied to the pure diffusion
    /// increment and `<psi, dW>`, over full-rank steps.
    pub max_linearized_error: f64,
    pub initial_capital: f64,
}

/// Cumulative Wiener paths from retained increments, `w[k][i] = W_i(t_k)`.
pub fn wiener_paths(increments: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]];
    for dw in increments {
        let prev = w.last().expect("nonempty").clone();
        w.push(prev.iter().zip(dw.iter()).map(|(a, b)| a + b).collect());
    }
    w
}

/// Hedges the claim along simulated paths: wealth starts at the claim mean
/// and accrues the strategy applied to discounted-curve increments.
pub fn replicate_claim(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    claim: Claim,
    initial: &[f64],
    rng: &CounterRng,
    paths: u64,
) -> Result<ReplicationReport> {
    if claim.min_factors() > truncation {
        return Err(LabError::FactorOutOfRange {
            index: claim.min_factors(),
            truncation,
        });
    }
    let results: Vec<(HedgePath, f64)> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<(HedgePath, f64)> {
            let surface = simulate_forward_surface(
                spec,
                grid,
                truncation,
                initial,
                rng,
                p,
                SimulateOptions::default(),
            )?;
            let increments = surface.increments.as_ref().expect("increments retained");
            let w = wiener_paths(increments, truncation);

            let mut wealth = claim.mean();
            let mut lin_max = 0.0f64;
            let mut current = discounted_curve(&surface, 0);
            for k in 0..grid.steps() {
                let gamma = assemble_gamma(&surface, spec, k)?;
                let sd = spectrum(&gamma)?;
                let psi = claim.integrand(k, &w, grid, truncation);
                let strategy = GeneralizedStrategy::pseudo(&sd, &psi);

                let next = discounted_curve(&surface, k + 1);
                let dp: Vec<f64> = next
                    .discounted
                    .iter()
                    .zip(current.discounted.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                wealth += strategy.apply(&gamma, &sd, &dp)?;
                current = next;

                if sd.rank == truncation {
                    let shock = DVector::from_vec(increments[k].clone());
                    let diffusion = gamma.apply(&shock);
                    let direct = psi.dot(&shock);
                    let through = strategy.apply(&gamma, &sd, &diffusion)?;
                    lin_max = lin_max.max((through - direct).abs());
                }
            }
            let claim_value = claim.terminal(&w, grid);
            Ok((
                HedgePath {
                    path: p,
                    claim: claim_value,
                    hedge_terminal: wealth,
                    residual: claim_value - wealth,
                },
                lin_max,
            ))
        })
        .collect::<Result<_>>()?;

    let rms = (results.iter().map(|(h, _)| h.residual * h.residual).sum::<f64>()
        / paths.max(1) as f64)
        .sqrt();
    let lin = results.iter().map(|(_, l)| *l).fold(0.0f64, f64::max);
    Ok(ReplicationReport {
        paths: results.into_iter().map(|(h, _)| h).collect(),
        rms_error: rms,
        max_linearized_error: lin,
        initial_capital: claim.mean(),
    })
}

/// Finite-factor projection diagnostics for a library claim.
#[derive(Debug, Clone)]
pub struct ProjectionDiagnostics {
    /// Rows `(n', MC gap, analytic gap)` with gap = `E[(xi_{n'} - xi)^2]`.
    pub gaps: Vec<(usize, f64, f64)>,
    /// MC estimate of `Var(xi)`.
    pub variance: f64,
    /// MC estimate of `E int |psi|^2 dt`.
    pub integrand_energy: f64,
    /// Standard error of the variance estimate.
    pub variance_se: f64,
}

pub fn finite_factor_projection(
    claim: Claim,
    grid: &TimeGrid,
    truncation: usize,
    rng: &CounterRng,
    paths: u64,
    n_values: &[usize],
) -> ProjectionDiagnostics {
    let sqrt_dt = grid.dt().sqrt();
    let per_path: Vec<(Vec<f64>, f64, f64)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let increments: Vec<Vec<f64>> = (0..grid.steps())
                .map(|k| {
                    (0..truncation)
                        .map(|i| sqrt_dt * rng.standard_normal(p, k as u64, i as u64))
                        .collect()
                })
                .collect();
            let w = wiener_paths(&increments, truncation);
            let xi = claim.terminal(&w, grid);
            let gaps: Vec<f64> = n_values
                .iter()
                .map(|&n| {
                    let d = claim.project_terminal(&w, grid, n) - xi;
                    d * d
                })
                .collect();
            let energy: f64 = (0..grid.steps())
                .map(|k| claim.integrand(k, &w, grid, truncation).norm_squared() * grid.dt())
                .sum();
            (gaps, xi, energy)
        })
        .collect();

    let m = paths.max(1) as f64;
    let mean_xi = per_path.iter().map(|(_, xi, _)| xi).sum::<f64>() / m;
    let sq: Vec<f64> = per_path.iter().map(|(_, xi, _)| (xi - mean_xi) * (xi - mean_xi)).collect();
    let variance = sq.iter().sum::<f64>() / (m - 1.0).max(1.0);
    let var_of_sq =
        sq.iter().map(|v| (v - variance) * (v - variance)).sum::<f64>() / (m - 1.0).max(1.0);
    let variance_se = (var_of_sq / m).sqrt();
    let integrand_energy = per_path.iter().map(|(_, _, e)| e).sum::<f64>() / m;
    let gaps = n_values
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mc = per_path.iter().map(|(g, _, _)| g[j]).sum::<f64>() / m;
            (n, mc, claim.projection_gap(grid.horizon(), n))
        })
        .collect();
    ProjectionDiagnostics { gaps, variance, integrand_energy, variance_se }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gspace::GMetric;
    use crate::market::ForwardSurface;

    fn sine_spec(n: usize) -> VolatilitySpec {
        VolatilitySpec::SineGaussian { gammas: (1..=n).map(|j| 1.0 / j as f64).collect() }
    }

    fn surface(spec: &VolatilitySpec, n: usize, steps: usize, seed: u64) -> ForwardSurface {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        simulate_forward_surface(
            spec,
            &grid,
            n,
            &vec![0.03; grid.len()],
            &CounterRng::new(seed),
            0,
            SimulateOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn sine_family_is_orthogonal_over_remaining_maturities() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let spec = VolatilitySpec::SineGaussian { gammas: vec![1.0, 1.0] };
        let gram = sine_gaussian_orthogonality(&spec, &grid, 0.0).unwrap();
        assert!(gram[(0, 1)].abs() < 1e-6);
        assert!((gram[(0, 0)] - 0.5).abs() < 1e-6);
        assert!((gram[(1, 1)] - 0.5).abs() < 1e-6);

        let half = sine_gaussian_orthogonality(&spec, &grid, 0.5).unwrap();
        assert!((half[(0, 0)] - 0.25).abs() < 1e-6);
        assert!((half[(1, 1)] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn single_factor_gram_is_scalar() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let spec = VolatilitySpec::SineGaussian { gammas: vec![2.0] };
        let gram = sine_gaussian_orthogonality(&spec, &grid, 0.0).unwrap();
        assert_eq!(gram.nrows(), 1);
        assert!((gram[(0, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_operator_has_zero_margin() {
        let spec = VolatilitySpec::ConstantSingle { sigma0: 0.0 };
        let s = surface(&spec, 1, 16, 1);
        let gamma = assemble_gamma(&s, &spec, 4).unwrap();
        let sd = spectrum(&gamma).unwrap();
        assert_eq!(injectivity_margin(&sd), 0.0);
        assert!(build_generalized_strategy(&sd, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn duplicated_columns_lose_injectivity() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let metric = GMetric::new(grid.clone());
        let col = DVector::from_vec(grid.nodes());
        let mut matrix = DMatrix::zeros(grid.len(), 2);
        matrix.set_column(0, &col);
        matrix.set_column(1, &col);
        let coords = metric.to_coords_matrix(&matrix).unwrap();
        let gamma =
            GammaOperator { step: 0, t: 0.0, b: matrix.clone(), matrix, coords, metric };
        let sd = spectrum(&gamma).unwrap();
        assert!(injectivity_margin(&sd) <= RANK_RTOL * sd.lambdas[0]);
        assert_eq!(sd.rank, 1);
    }

    #[test]
    fn sine_operator_is_injective_at_truncation() {
        let spec = sine_spec(8);
        let s = surface(&spec, 8, 64, 3);
        let gamma = assemble_gamma(&s, &spec, 0).unwrap();
        let sd = spectrum(&gamma).unwrap();
        assert!(injectivity_margin(&sd) > RANK_RTOL * sd.lambdas[0]);
        assert_eq!(sd.rank, 8);
    }

    #[test]
    fn strategy_round_trip_identity_on_probes() {
        let spec = sine_spec(4);
        let s = surface(&spec, 4, 50, 5);
        let gamma = assemble_gamma(&s, &spec, 10).unwrap();
        let sd = spectrum(&gamma).unwrap();
        let rng = CounterRng::new(77);
        for probe in 0..20u64 {
            let psi = DVector::from_fn(4, |i, _| rng.standard_normal(probe, i as u64, 0));
            let u = DVector::from_fn(4, |i, _| rng.standard_normal(probe, i as u64, 1));
            let strategy = build_generalized_strategy(&sd, &psi).unwrap();
            let through = strategy.apply(&gamma, &sd, &gamma.apply(&u)).unwrap();
            let direct = psi.dot(&u);
            assert!((through - direct).abs() < 1e-8, "probe {probe}: {through} vs {direct}");
        }
    }

    #[test]
    fn unit_spectral_load_recovers_top_direction() {
        let spec = sine_spec(4);
        let s = surface(&spec, 4, 50, 6);
        let gamma = assemble_gamma(&s, &spec, 5).unwrap();
        let sd = spectrum(&gamma).unwrap();
        let psi = sd.vectors.column(0).clone_owned() * sd.lambdas[0];
        let strategy = build_generalized_strategy(&sd, &psi).unwrap();
        // Gamma g^1 comes back with coefficient 1 on the top direction
        let g1 = sd.vectors.column(0).clone_owned();
        let v = strategy.apply(&gamma, &sd, &gamma.apply(&g1)).unwrap();
        assert!((v - sd.lambdas[0]).abs() < 1e-10);
    }

    #[test]
    fn zero_claim_replicates_exactly() {
        let spec = sine_spec(2);
        let grid = TimeGrid::new(1.0, 30).unwrap();
        let report = replicate_claim(
            &spec,
            &grid,
            2,
            Claim::Zero,
            &vec![0.03; grid.len()],
            &CounterRng::new(3),
            20,
        )
        .unwrap();
        assert_eq!(report.rms_error, 0.0);
        assert!(report.paths.iter().all(|h| h.residual == 0.0));
    }

    #[test]
    fn wiener_claim_hedges_with_small_error() {
        let spec = sine_spec(2);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let report = replicate_claim(
            &spec,
            &grid,
            2,
            Claim::WienerTerminal { factor: 0 },
            &vec![0.03; grid.len()],
            &CounterRng::new(13),
            50,
        )
        .unwrap();
        assert!(report.max_linearized_error <= 1e-8, "lin {}", report.max_linearized_error);
        assert!(report.rms_error < 0.2, "rms {}", report.rms_error);
    }

    #[test]
    fn claim_needs_enough_factors() {
        let spec = sine_spec(2);
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let err = replicate_claim(
            &spec,
            &grid,
            2,
            Claim::WienerSum { factors: 4 },
            &vec![0.03; grid.len()],
            &CounterRng::new(1),
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn projection_gap_matches_variance_bookkeeping() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let claim = Claim::WienerSum { factors: 4 };
        let diag =
            finite_factor_projection(claim, &grid, 4, &CounterRng::new(8), 4000, &[1, 2, 4]);
        for (n, mc, analytic) in &diag.gaps {
            let tol = 3.0 * (2.0 * analytic.max(0.5)) / (4000f64).sqrt();
            assert!((mc - analytic).abs() < tol, "n'={n}: {mc} vs {analytic}");
        }
        // xi depends on all four factors: projecting onto 4 leaves no gap
        assert_eq!(diag.gaps.last().unwrap().1, 0.0);
    }

    #[test]
    fn ito_isometry_holds_within_mc_error() {
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let claim = Claim::ExpMartingale { a: 0.5, factor: 0 };
        let diag = finite_factor_projection(claim, &grid, 1, &CounterRng::new(21), 4000, &[1]);
        let gap = (diag.variance - diag.integrand_energy).abs();
        assert!(gap < 3.0 * diag.variance_se.max(0.01), "var {} energy {}", diag.variance, diag.integrand_energy);
        // single-factor claim projects onto itself
        assert_eq!(diag.gaps[0].1, 0.0);
    }

    #[test]
    fn claim_library_names_round_trip() {
        for name in ["zero", "wiener", "wiener-sum", "exp-martingale"] {
            let claim = Claim::from_name(name, 3).unwrap();
            assert_eq!(claim.name(), name);
        }
        assert!(Claim::from_name("lookback", 3).is_none());
    }
}
