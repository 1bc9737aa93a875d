//! The bond-price diffusion operator and its spectral structure.
//!
//! At each time index the operator maps a factor shock `u` in l^2 to the
//! discounted-curve response `T -> P_hat(t,T) sum_i b_i(t,T) u_i` in G, where
//! `b_i(t,T) = -int_0^T sigma_i(t,u) du`. Its singular structure (against the
//! G metric) decides which integrands the attainable set contains.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::gspace::{g_norm, GMetric};
use crate::market::{discounted_curve, ForwardSurface};
use crate::volatility::{eval_volatility, h_norm_sq, VolatilitySpec};

/// Singular values below `RANK_RTOL * lambda_1` are treated as zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Discretized operator at one time index.
#[derive(Debug, Clone)]
pub struct GammaOperator {
    pub step: usize,
    pub t: f64,
    /// `b[(l, i)] = b_i(t_k, T_l)`.
    pub b: DMatrix<f64>,
    /// `matrix[(l, i)] = P_hat(t_k, T_l) * b_i(t_k, T_l)`; columns are G curves.
    pub matrix: DMatrix<f64>,
    /// Columns premultiplied by the G coordinate map, so plain Euclidean
    /// geometry on `coords` is G geometry on `matrix`.
    pub coords: DMatrix<f64>,
    pub metric: GMetric,
}

/// Singular values and right singular vectors of the operator as a map
/// `l^2 -> (G, <.,.>_G)`, in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambdas: Vec<f64>,
    /// Column `i` is the right singular vector `g^i` in l^2 coordinates.
    pub vectors: DMatrix<f64>,
    pub rank: usize,
}

impl GammaOperator {
    pub fn factors(&self) -> usize {
        self.matrix.ncols()
    }

    /// Applies the operator to a shock vector, returning a curve.
    pub fn apply(&self, shock: &DVector<f64>) -> Vec<f64> {
        let curve = &self.matrix * shock;
        curve.iter().copied().collect()
    }

    /// Action of `Q_t = Gamma_t Gamma_t'` on a curve.
    pub fn q_apply(&self, curve: &[f64]) -> Result<Vec<f64>> {
        let shock = gamma_adjoint(self, curve)?;
        Ok(self.apply(&shock))
    }
}

/// Assembles the operator at time index `k` from a simulated surface.
pub fn assemble_gamma(
    surface: &ForwardSurface,
    spec: &VolatilitySpec,
    k: usize,
) -> Result<GammaOperator> {
    let grid = &surface.grid;
    let n = surface.factors;
    let dt = grid.dt();
    let t = grid.node(k);
    let state = surface.path_state(k);
    let curve = discounted_curve(surface, k);

    let mut b = DMatrix::zeros(grid.len(), n);
    let mut matrix = DMatrix::zeros(grid.len(), n);
    for i in 0..n {
        let mut acc = 0.0;
        let mut prev = eval_volatility(spec, grid, i, t, 0.0, &state)?;
        for l in 1..grid.len() {
            let cur = eval_volatility(spec, grid, i, t, grid.node(l), &state)?;
            acc -= 0.5 * (prev + cur) * dt;
            prev = cur;
            b[(l, i)] = acc;
            matrix[(l, i)] = curve.discounted[l] * acc;
        }
    }
    let metric = GMetric::new(grid.clone());
    let coords = metric.to_coords_matrix(&matrix)?;
    Ok(GammaOperator { step: k, t, b, matrix, coords, metric })
}

/// Adjoint against the G inner product: `Gamma' g = A' (T g)` where
/// `A = T Gamma`. Satisfies `<Gamma' g, u> = <g, Gamma u>_G`.
pub fn gamma_adjoint(gamma: &GammaOperator, curve: &[f64]) -> Result<DVector<f64>> {
    let coords = gamma.metric.to_coords(curve)?;
    Ok(gamma.coords.transpose() * coords)
}

/// Hilbert-Schmidt norm `sqrt(sum_i |Gamma e_i|_G^2)`.
pub fn hs_norm(gamma: &GammaOperator) -> f64 {
    gamma.coords.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral decomposition through the symmetric eigenproblem of
/// `Gamma' Gamma = A' A`; returns a full orthonormal l^2 basis, including
/// null directions, in nonincreasing singular-value order.
pub fn spectrum(gamma: &GammaOperator) -> Result<SpectralData> {
    let gram = gamma.coords.transpose() * &gamma.coords;
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(LabError::SpectrumFailed("non-finite entries in the Gram matrix".into()));
    }
    let n = gram.ncols();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut lambdas = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (pos, &idx) in order.iter().enumerate() {
        lambdas.push(eig.eigenvalues[idx].max(0.0).sqrt());
        vectors.set_column(pos, &eig.eigenvectors.column(idx));
    }
    let cutoff = RANK_RTOL * lambdas[0];
    let rank = lambdas.iter().take_while(|&&l| l > cutoff).count();
    Ok(SpectralData { lambdas, vectors, rank })
}

impl SpectralData {
    pub fn truncation(&self) -> usize {
        self.lambdas.len()
    }

    /// Coefficients of an l^2 vector in the singular basis.
    pub fn to_spectral(&self, v: &DVector<f64>) -> DVector<f64> {
        self.vectors.transpose() * v
    }

    /// l^2 vector from singular-basis coefficients.
    pub fn from_spectral(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.vectors * coeffs
    }
}

/// Minimal-norm preimage of a curve in the operator's column span; the
/// out-of-span remainder is returned as a residual G-norm.
pub fn min_norm_preimage(
    gamma: &GammaOperator,
    spectral: &SpectralData,
    curve: &[f64],
) -> Result<(DVector<f64>, f64)> {
    let adj = gamma_adjoint(gamma, curve)?; // A' (T g)
    let in_spec = spectral.to_spectral(&adj);
    let mut coeffs = DVector::zeros(spectral.truncation());
    for i in 0..spectral.rank {
        coeffs[i] = in_spec[i] / (spectral.lambdas[i] * spectral.lambdas[i]);
    }
    let preimage = spectral.from_spectral(&coeffs);
    let reconstruction = gamma.apply(&preimage);
    let residual: Vec<f64> =
        curve.iter().zip(reconstruction.iter()).map(|(a, b)| a - b).collect();
    Ok((preimage, g_norm(&residual, &gamma.metric)?))
}

/// Pathwise check of the Hilbert-Schmidt bound
/// `|Gamma e_i|_G^2 <= 2 B^2 (horizon * A + 1) |sigma_i(t,.)|_H^2`.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// `A = max_k |f(t_k,.)|_H`.
    pub sup_f_h_norm: f64,
    /// `B = max |P_hat|`.
    pub sup_discounted: f64,
    /// Worst `(lhs - rhs) / dt` over all `(k, i)` (the observed slack constant).
    pub worst_excess_over_dt: f64,
    /// Entries `(k, i, excess)` with `lhs > rhs + slack`.
    pub violations: Vec<(usize, usize, f64)>,
    /// `sum_k ||Gamma_{t_k}||_HS^2 dt`, the integrability surrogate.
    pub hs_time_integral: f64,
}

pub fn proposition1_report(
    surface: &ForwardSurface,
    spec: &VolatilitySpec,
    slack_constant: f64,
) -> Result<BoundReport> {
    let grid = &surface.grid;
    let dt = grid.dt();
    let horizon = grid.horizon();

    let mut sup_f = 0.0f64;
    let mut sup_p = 0.0f64;
    for k in 0..grid.len() {
        let sq: Vec<f64> = surface.f[k].iter().map(|v| v * v).collect();
        sup_f = sup_f.max(grid.trapezoid(&sq, 0, grid.steps()).sqrt());
        let c = discounted_curve(surface, k);
        for p in &c.discounted {
            sup_p = sup_p.max(p.abs());
        }
    }
    let envelope = 2.0 * sup_p * sup_p * (horizon * sup_f + 1.0);

    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut hs_integral = 0.0;
    for k in 0..grid.len() {
        let gamma = assemble_gamma(surface, spec, k)?;
        hs_integral += hs_norm(&gamma).powi(2) * dt;
        let state = surface.path_state(k);
        for i in 0..gamma.factors() {
            let column: Vec<f64> = gamma.matrix.column(i).iter().copied().collect();
            let lhs = g_norm(&column, &gamma.metric)?.powi(2);
            let rhs = envelope * h_norm_sq(spec, grid, i, k, &state)?;
            let excess = lhs - rhs;
            worst = worst.max(excess / dt);
            if excess > slack_constant * dt {
                violations.push((k, i, excess));
            }
        }
    }
    Ok(BoundReport {
        sup_f_h_norm: sup_f,
        sup_discounted: sup_p,
        worst_excess_over_dt: worst,
        violations,
        hs_time_integral: hs_integral,
    })
}
