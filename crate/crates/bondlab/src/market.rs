//! Forward-rate surface simulation under the no-arbitrage drift.
//!
//! Euler-Maruyama time stepping on the shared uniform grid; entries with
//! `t_k >= T_l` are frozen, so the diagonal read `f(t_k, t_k)` is the short
//! rate and bond-price quadratures below the current time reuse exact frozen
//! values.

use std::io::{BufRead, Write};

use crate::error::{LabError, Result};
use crate::grid::TimeGrid;
use crate::rng::CounterRng;
use crate::volatility::{drift_row, eval_volatility, PathState, VolatilitySpec};

/// One simulated forward surface `f(t_k, T_l)` with the drift actually used.
#[derive(Debug, Clone)]
pub struct ForwardSurface {
    pub grid: TimeGrid,
    pub factors: usize,
    /// `f[k][l] = f(t_k, T_l)`.
    pub f: Vec<Vec<f64>>,
    /// `alpha[k][l]` = drift applied when stepping from `t_k` (zero where frozen).
    pub alpha: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
    /// Wiener increments `increments[k][i] = sqrt(dt) * Z_{k,i}` when retained.
    pub increments: Option<Vec<Vec<f64>>>,
    /// Running base integral per maturity for sign-switching specs,
    /// `switch_state[k][l]` = value at `t_k`.
    pub switch_state: Option<Vec<Vec<f64>>>,
}

impl ForwardSurface {
    /// Short rate r(t_k) = f(t_k, t_k).
    pub fn short_rate(&self, k: usize) -> f64 {
        self.f[k][k]
    }

    /// Path state view for volatility evaluation at step `k`.
    pub fn path_state(&self, k: usize) -> PathState<'_> {
        match &self.switch_state {
            Some(rows) => PathState::SignIntegral { values: &rows[k] },
            None => PathState::Deterministic,
        }
    }
}

/// Discounted and undiscounted bond curves at one time index.
#[derive(Debug, Clone)]
pub struct DiscountedCurve {
    pub step: usize,
    /// `P(t_k, T_l) = exp(-int_{t_k}^{T_l} f(t_k, u) du)` (1 for `T_l <= t_k`).
    pub bond: Vec<f64>,
    /// `P_hat(t_k, T_l) = exp(-int_0^{T_l} f(t_k, u) du)`.
    pub discounted: Vec<f64>,
}

/// Short-rate and bank-account paths.
#[derive(Debug, Clone)]
pub struct RatePath {
    pub short_rate: Vec<f64>,
    pub bank: Vec<f64>,
}

/// Options for `simulate_forward_surface`.
#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub retain_increments: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { retain_increments: true }
    }
}

/// Euler-Maruyama simulation of the forward surface:
/// `f(t_{k+1}, T_l) = f(t_k, T_l) + alpha(t_k, T_l) dt + sum_i sigma_i(t_k, T_l) dW_i`.
pub fn simulate_forward_surface(
    spec: &VolatilitySpec,
    grid: &TimeGrid,
    truncation: usize,
    initial: &[f64],
    rng: &CounterRng,
    path_index: u64,
    options: SimulateOptions,
) -> Result<ForwardSurface> {
    spec.validate(grid)?;
    if truncation < 1 || truncation > spec.factors() {
        return Err(LabError::FactorOutOfRange { index: truncation, truncation: spec.factors() });
    }
    if initial.len() != grid.len() {
        return Err(LabError::LengthMismatch { got: initial.len(), expected: grid.len() });
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite { step: 0, maturity: 0 });
    }

    let m = grid.steps();
    let n = truncation;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let state_dependent = spec.is_state_dependent();

    let mut f = vec![initial.to_vec()];
    let mut alpha = Vec::with_capacity(m + 1);
    let mut increments = options.retain_increments.then(|| Vec::with_capacity(m));
    let mut switch_rows = state_dependent.then(|| vec![vec![0.0; grid.len()]]);

    for k in 0..m {
        let t = grid.node(k);
        let current = f[k].clone();
        let switch_row = switch_rows.as_ref().map(|rows| rows[k].clone());
        let state = match &switch_row {
            Some(values) => PathState::SignIntegral { values },
            None => PathState::Deterministic,
        };

        let dw: Vec<f64> =
            (0..n).map(|i| sqrt_dt * rng.standard_normal(path_index, k as u64, i as u64)).collect();

        let alpha_row = drift_row(spec, grid, n, k, &state)?;
        let mut next = current.clone();
        for l in (k + 1)..grid.len() {
            let maturity = grid.node(l);
            let mut diff = 0.0;
            for (i, dwi) in dw.iter().enumerate() {
                let s = eval_volatility(spec, grid, i, t, maturity, &state)?;
                diff += s * dwi;
            }
            next[l] = current[l] + alpha_row[l] * dt + diff;
            if !next[l].is_finite() {
                return Err(LabError::NonFinite { step: k + 1, maturity: l });
            }
        }

        if let (Some(rows), VolatilitySpec::SignSwitching { base }) = (&mut switch_rows, spec) {
            // advance the base running integral per maturity (predictable:
            // the sign used at step k came from the value at t_k)
            let prev = rows[k].clone();
            let mut next_y = prev.clone();
            for l in 0..grid.len() {
                let maturity = grid.node(l);
                let mut dy = 0.0;
                for (i, dwi) in dw.iter().enumerate() {
                    dy += eval_volatility(base, grid, i, t, maturity, &PathState::Deterministic)?
                        * dwi;
                }
                next_y[l] = prev[l] + dy;
            }
            rows.push(next_y);
        }

        alpha.push(alpha_row);
        if let Some(incs) = &mut increments {
            incs.push(dw);
        }
        f.push(next);
    }
    alpha.push(vec![0.0; grid.len()]); // nothing is stepped from t_M

    Ok(ForwardSurface {
        grid: grid.clone(),
        factors: n,
        f,
        alpha,
        initial: initial.to_vec(),
        seed: rng.seed(),
        path_index,
        increments,
        switch_state: switch_rows,
    })
}

/// Bond and discounted-bond curves at time index `k` by maturity trapezoid.
pub fn discounted_curve(surface: &ForwardSurface, k: usize) -> DiscountedCurve {
    let grid = &surface.grid;
    let row = &surface.f[k];
    let dt = grid.dt();
    let len = grid.len();
    let mut cumulative = Vec::with_capacity(len);
    cumulative.push(0.0);
    for l in 1..len {
        cumulative.push(cumulative[l - 1] + 0.5 * (row[l - 1] + row[l]) * dt);
    }
    let discounted: Vec<f64> = cumulative.iter().map(|i| (-i).exp()).collect();
    let bond: Vec<f64> =
        (0..len).map(|l| if l > k { (cumulative[k] - cumulative[l]).exp() } else { 1.0 }).collect();
    DiscountedCurve { step: k, bond, discounted }
}

/// Diagonal short rate and bank account `B(t) = exp(trapezoid of r)`.
pub fn rate_path(surface: &ForwardSurface) -> RatePath {
    let grid = &surface.grid;
    let dt = grid.dt();
    let short_rate: Vec<f64> = (0..grid.len()).map(|k| surface.short_rate(k)).collect();
    let mut bank = Vec::with_capacity(grid.len());
    bank.push(1.0);
    for k in 0..grid.steps() {
        let log_step = 0.5 * (short_rate[k] + short_rate[k + 1]) * dt;
        bank.push(bank[k] * log_step.exp());
    }
    RatePath { short_rate, bank }
}

/// Reads an initial curve from two-column CSV `(maturity, rate)` and
/// linearly interpolates it onto the grid (flat extrapolation at the ends).
pub fn read_initial_curve<R: BufRead>(reader: R, grid: &TimeGrid) -> Result<Vec<f64>> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',').map(str::trim);
        let (a, b) = (parts.next(), parts.next());
        match (a.and_then(|v| v.parse::<f64>().ok()), b.and_then(|v| v.parse::<f64>().ok())) {
            (Some(maturity), Some(rate)) => points.push((maturity, rate)),
            _ if idx == 0 => continue, // header row
            _ => {
                return Err(LabError::Config(vec![format!(
                    "initial curve line {}: expected `maturity,rate`, got `{trimmed}`",
                    idx + 1
                )]))
            }
        }
    }
    if points.is_empty() {
        return Err(LabError::Config(vec!["initial curve file has no data rows".into()]));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let interp = |t: f64| -> f64 {
        if t <= points[0].0 {
            return points[0].1;
        }
        if t >= points[points.len() - 1].0 {
            return points[points.len() - 1].1;
        }
        let j = points.partition_point(|p| p.0 <= t);
        let (t0, r0) = points[j - 1];
        let (t1, r1) = points[j];
        r0 + (r1 - r0) * (t - t0) / (t1 - t0)
    };
    Ok(grid.nodes().iter().map(|&t| interp(t)).collect())
}

/// Emits the surface as CSV with header `t,T,f,alpha`.
pub fn write_surface_csv<W: Write>(surface: &ForwardSurface, writer: &mut W) -> Result<usize> {
    writeln!(writer, "t,T,f,alpha")?;
    let mut rows = 0;
    for k in 0..surface.grid.len() {
        for l in 0..surface.grid.len() {
            writeln!(
                writer,
                "{},{},{},{}",
                fmt(surface.grid.node(k)),
                fmt(surface.grid.node(l)),
                fmt(surface.f[k][l]),
                fmt(surface.alpha[k][l]),
            )?;
            rows += 1;
        }
    }
    Ok(rows)
}

/// Canonical float formatting used by all CSV emitters (shortest round-trip).
pub fn fmt(v: f64) -> String {
    let mut s = format!("{v}");
    if s == "-0" {
        s = "0".into();
    }
    s
}
