//! Forward-rate volatility families and the no-arbitrage drift.
//!
//! All families obey the zero-beyond-maturity convention: `sigma_i(t, T) = 0`
//! whenever `t >= T`. The drift is tied to the volatility by
//! `alpha(t, T) = sum_i sigma_i(t, T) * int_t^T sigma_i(t, u) du`.

use crate::error::{LabError, Result};
use crate::grid::TimeGrid;

/// Tagged volatility family `sigma_i(t, T)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolatilitySpec {
    /// Single factor, constant level before maturity.
    ConstantSingle { sigma0: f64 },
    /// `sigma_j(t,T) = gamma_j sin(j pi ((T-t)/(horizon-t)) v 0)`, one entry per factor.
    SineGaussian { gammas: Vec<f64> },
    /// Base volatility switched off per maturity while the running base
    /// stochastic integral at that maturity is negative.
    SignSwitching { base: Box<VolatilitySpec> },
    /// Grid-tabulated values, `values[factor][k][l] = sigma_factor(t_k, T_l)`.
    Tabulated { values: Vec<Vec<Vec<f64>>> },
}

/// Path-dependent information needed by state-dependent families.
///
/// For `SignSwitching`, `sign_integral[l]` carries the running value of
/// `sum_i int_0^t sigma_tilde_i(s, T_l) dW_i(s)` at the current step.
#[derive(Debug, Clone, Copy)]
pub enum PathState<'a> {
    Deterministic,
    SignIntegral { values: &'a [f64] },
}

impl VolatilitySpec {
    /// Number of factors the family natively defines.
    pub fn factors(&self) -> usize {
        match self {
            VolatilitySpec::ConstantSingle { .. } => 1,
            VolatilitySpec::SineGaussian { gammas } => gammas.len(),
            VolatilitySpec::SignSwitching { base } => base.factors(),
            VolatilitySpec::Tabulated { values } => values.len(),
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(self, VolatilitySpec::SignSwitching { .. })
    }

    /// Tabulated family with one constant level per factor before maturity,
    /// `sigma_i(t_k, T_l) = levels[i]` for `k < l`, zero otherwise.
    pub fn constant_family(grid: &TimeGrid, levels: &[f64]) -> VolatilitySpec {
        let values = levels
            .iter()
            .map(|&c| {
                (0..grid.len())
                    .map(|k| (0..grid.len()).map(|l| if k < l { c } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        VolatilitySpec::Tabulated { values }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        match self {
            VolatilitySpec::ConstantSingle { sigma0 } => {
                if !sigma0.is_finite() {
                    return Err(LabError::InvalidGrid("sigma0 must be finite".into()));
                }
            }
            VolatilitySpec::SineGaussian { gammas } => {
                if gammas.is_empty() || gammas.iter().any(|g| !g.is_finite()) {
                    return Err(LabError::InvalidGrid(
                        "sine-Gaussian coefficients must be non-empty and finite".into(),
                    ));
                }
            }
            VolatilitySpec::SignSwitching { base } => base.validate(grid)?,
            VolatilitySpec::Tabulated { values } => {
                for (i, table) in values.iter().enumerate() {
                    if table.len() != grid.len() || table.iter().any(|r| r.len() != grid.len()) {
                        return Err(LabError::InvalidGrid(format!(
                            "tabulated factor {i} does not match the grid"
                        )));
                    }
                    for (k, row) in table.iter().enumerate() {
                        for (l, v) in row.iter().enumerate() {
                            if !v.is_finite() {
                                return Err(LabError::NonFinite { step: k, maturity: l });
                            }
                            if k >= l && *v != 0.0 {
                                return Err(LabError::InvalidGrid(format!(
                                    "tabulated factor {i} violates sigma(t,T)=0 for t>=T at ({k},{l})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_time(value: f64, grid: &TimeGrid) -> Result<()> {
    if value < 0.0 || value > grid.horizon() || !value.is_finite() {
        return Err(LabError::TimeOutOfRange { value, horizon: grid.horizon() });
    }
    Ok(())
}

fn node_index(grid: &TimeGrid, t: f64) -> usize {
    ((t / grid.dt()).round() as usize).min(grid.steps())
}

/// `sigma_factor(t, T)` for the given family. `factor` is zero-based.
pub fn eval_volatility(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    factor: usize,
    t: f64,
    maturity: f64,
    state: &PathState<'_>,
) -> Result<f64> {
    if factor >= spec.factors() {
        return Err(LabError::FactorOutOfRange { index: factor, truncation: spec.factors() });
    }
    check_time(t, grid)?;
    check_time(maturity, grid)?;
    if t >= maturity {
        return Ok(0.0);
    }
    match spec {
        VolatilitySpec::ConstantSingle { sigma0 } => Ok(*sigma0),
        VolatilitySpec::SineGaussian { gammas } => {
            let j = (factor + 1) as f64;
            let ratio = ((maturity - t) / (grid.horizon() - t)).max(0.0);
            Ok(gammas[factor] * (j * std::f64::consts::PI * ratio).sin())
        }
        VolatilitySpec::SignSwitching { base } => {
            let values = match state {
                PathState::SignIntegral { values } => *values,
                PathState::Deterministic => return Err(LabError::MissingPathState),
            };
            if values.len() != grid.len() {
                return Err(LabError::LengthMismatch { got: values.len(), expected: grid.len() });
            }
            if values[node_index(grid, maturity)] >= 0.0 {
                eval_volatility(base, grid, factor, t, maturity, state)
            } else {
                Ok(0.0)
            }
        }
        VolatilitySpec::Tabulated { values } => {
            Ok(values[factor][node_index(grid, t)][node_index(grid, maturity)])
        }
    }
}

/// Closed form of `int_t^T sigma_factor(t, u) du`, if the family has one.
fn inner_integral_closed(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    factor: usize,
    t: f64,
    maturity: f64,
) -> Option<f64> {
    if t >= maturity {
        return Some(0.0);
    }
    match spec {
        VolatilitySpec::ConstantSingle { sigma0 } => Some(sigma0 * (maturity - t)),
        VolatilitySpec::SineGaussian { gammas } => {
            let omega = (factor + 1) as f64 * std::f64::consts::PI / (grid.horizon() - t);
            Some(gammas[factor] * (1.0 - (omega * (maturity - t)).cos()) / omega)
        }
        _ => None,
    }
}

/// `int_t^T sigma_factor(t, u) du`: closed form where available, composite
/// trapezoid on the grid nodes otherwise.
pub fn inner_integral(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    factor: usize,
    t: f64,
    maturity: f64,
    state: &PathState<'_>,
) -> Result<f64> {
    if let Some(v) = inner_integral_closed(spec, grid, factor, t, maturity) {
        return Ok(v);
    }
    let (k, l) = (node_index(grid, t), node_index(grid, maturity));
    let mut acc = 0.0;
    for m in k..l {
        let a = eval_volatility(spec, grid, factor, t, grid.node(m), state)?;
        let b = eval_volatility(spec, grid, factor, t, grid.node(m + 1), state)?;
        acc += 0.5 * (a + b) * grid.dt();
    }
    Ok(acc)
}

/// HJM no-arbitrage drift `alpha(t, T) = sum_i sigma_i(t,T) int_t^T sigma_i(t,u) du`.
pub fn hjm_drift(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    t: f64,
    maturity: f64,
    state: &PathState<'_>,
) -> Result<f64> {
    if t >= maturity {
        return Ok(0.0);
    }
    let n = truncation.min(spec.factors());
    let mut acc = 0.0;
    for i in 0..n {
        let s = eval_volatility(spec, grid, i, t, maturity, state)?;
        if s != 0.0 {
            acc += s * inner_integral(spec, grid, i, t, maturity, state)?;
        }
    }
    Ok(acc)
}

/// Row of drifts `alpha(t_k, T_l)` for all maturities, sharing cumulative
/// inner integrals per factor. Used by the simulation hot path.
pub fn drift_row(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    k: usize,
    state: &PathState<'_>,
) -> Result<Vec<f64>> {
    let n = truncation.min(spec.factors());
    let t = grid.node(k);
    let mut alpha = vec![0.0; grid.len()];
    if inner_integral_closed(spec, grid, 0, 0.0, grid.dt()).is_some() {
        for (l, a) in alpha.iter_mut().enumerate().skip(k + 1) {
            let maturity = grid.node(l);
            for i in 0..n {
                let s = eval_volatility(spec, grid, i, t, maturity, state)?;
                if s != 0.0 {
                    *a += s * inner_integral_closed(spec, grid, i, t, maturity).unwrap();
                }
            }
        }
        return Ok(alpha);
    }
    // trapezoid path: cumulative inner integral per factor along the row
    let dt = grid.dt();
    let mut sig_prev = vec![0.0; n];
    let mut cum = vec![0.0; n];
    for l in (k + 1)..grid.len() {
        let maturity = grid.node(l);
        let mut a = 0.0;
        for i in 0..n {
            let s = eval_volatility(spec, grid, i, t, maturity, state)?;
            cum[i] += 0.5 * (sig_prev[i] + s) * dt;
            sig_prev[i] = s;
            a += s * cum[i];
        }
        alpha[l] = a;
    }
    Ok(alpha)
}

/// Squared H-norm `|sigma_i(t_k, .)|^2_H = int_0^horizon sigma_i(t_k, T)^2 dT`
/// by trapezoid on the maturity nodes.
pub fn h_norm_sq(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    factor: usize,
    k: usize,
    state: &PathState<'_>,
) -> Result<f64> {
    let t = grid.node(k);
    let sq: Vec<f64> = (0..grid.len())
        .map(|l| eval_volatility(spec, grid, factor, t, grid.node(l), state).map(|s| s * s))
        .collect::<Result<_>>()?;
    Ok(grid.trapezoid(&sq, 0, grid.steps()))
}
