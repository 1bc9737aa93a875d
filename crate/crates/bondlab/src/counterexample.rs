//! A stopped exponential local martingale with two price representations.
//!
//! On a scalar Wiener path B, stop at the first time B(t)^2 + t >= 1 and run
//! the Doleans-Dade exponent of X(t) = -2B(t)/(1-t)^2. The stopped exponent
//! lands strictly below -1 pathwise, so the terminal value M(1) = e^L sits in
//! (0, e^{-1}) while the process starts at 1: its expectation cannot be 1,
//! and the constant 1 and E[M(1)] both represent the same bounded terminal
//! value. The integrand blows up near t = 1, hence the geometric grid.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::rng::CounterRng;

/// Nodes `t_i = 1 - q^i`, `q = eps^(1/steps)`: uniform-ratio refinement
/// toward t = 1, last node at `1 - eps`.
pub fn geometric_grid(steps: usize, eps: f64) -> Result<Vec<f64>> {
    if steps < 2 || !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::InvalidGrid(format!(
            "geometric grid needs steps >= 2 and eps in (0,1), got steps={steps}, eps={eps}"
        )));
    }
    let q = eps.powf(1.0 / steps as f64);
    Ok((0..=steps).map(|i| 1.0 - q.powi(i as i32)).collect())
}

/// One simulated path of the example.
#[derive(Debug, Clone)]
pub struct CounterexamplePath {
    pub path: u64,
    /// First grid node with `B^2 + t >= 1` (forced to the last node if the
    /// crossing is missed by the grid).
    pub tau: f64,
    /// Stopped log-exponent `int X dB - 1/2 int X^2 dt`.
    pub l: f64,
    /// `exp(l)`.
    pub m1: f64,
    /// `int_0^tau X^2 dt`, the divergence surrogate.
    pub x_sq_integral: f64,
}

/// Deterministic core: runs the example on explicit Brownian increments
/// (one per grid interval), left-point Ito sums throughout.
pub fn counterexample_from_increments(nodes: &[f64], db: &[f64]) -> CounterexamplePath {
    debug_assert_eq!(db.len() + 1, nodes.len());
    let last = nodes.len() - 1;
    let mut b = 0.0;
    let mut l = 0.0;
    let mut x_sq = 0.0;
    let mut tau = nodes[last];
    for i in 0..last {
        let t = nodes[i];
        if b * b + t >= 1.0 {
            tau = t;
            break;
        }
        let dt = nodes[i + 1] - nodes[i];
        let one_minus = 1.0 - t;
        let x = -2.0 * b / (one_minus * one_minus);
        l += x * db[i] - 0.5 * x * x * dt;
        x_sq += x * x * dt;
        b += db[i];
    }
    CounterexamplePath { path: 0, tau, l, m1: l.exp(), x_sq_integral: x_sq }
}

/// As above with standard normal draws scaled by the local step size.
pub fn counterexample_from_normals(nodes: &[f64], z: &[f64]) -> CounterexamplePath {
    let db: Vec<f64> =
        nodes.windows(2).zip(z.iter()).map(|(w, zi)| (w[1] - w[0]).sqrt() * zi).collect();
    counterexample_from_increments(nodes, &db)
}

/// Simulates one path on the geometric grid.
pub fn simulate_counterexample(
    rng: &CounterRng,
    path_index: u64,
    steps: usize,
    eps: f64,
) -> Result<CounterexamplePath> {
    let nodes = geometric_grid(steps, eps)?;
    let z: Vec<f64> =
        (0..steps).map(|i| rng.standard_normal(path_index, i as u64, 0)).collect();
    let mut out = counterexample_from_normals(&nodes, &z);
    out.path = path_index;
    Ok(out)
}

/// Monte Carlo estimate of `E[M(1)]` with a 99% confidence interval.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub paths: Vec<CounterexamplePath>,
    pub mean_m1: f64,
    pub se: f64,
    pub ci99: (f64, f64),
    /// Fraction of paths with `L < -1 + slack` at slack 0.05.
    pub frac_l_below: f64,
    /// Fraction of paths with `M(1) = e^L > 0`, certified by `L` being
    /// finite (the stored `m1` may underflow to 0 on deep-loss paths).
    pub frac_m1_positive: f64,
}

pub fn expectation_gap(
    rng: &CounterRng,
    paths: u64,
    steps: usize,
    eps: f64,
) -> Result<GapReport> {
    let samples: Vec<CounterexamplePath> = (0..paths)
        .into_par_iter()
        .map(|p| simulate_counterexample(rng, p, steps, eps))
        .collect::<Result<_>>()?;
    let m = paths.max(1) as f64;
    let mean = samples.iter().map(|s| s.m1).sum::<f64>() / m;
    let var =
        samples.iter().map(|s| (s.m1 - mean) * (s.m1 - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    let se = (var / m).sqrt();
    let z99 = 2.5758;
    let frac_l = samples.iter().filter(|s| s.l < -1.0 + 0.05).count() as f64 / m;
    let frac_pos = samples.iter().filter(|s| s.l.is_finite()).count() as f64 / m;
    Ok(GapReport {
        paths: samples,
        mean_m1: mean,
        se,
        ci99: (mean - z99 * se, mean + z99 * se),
        frac_l_below: frac_l,
        frac_m1_positive: frac_pos,
    })
}

/// The two representation constants of the same bounded terminal value, with
/// the divergence surrogate and a bounded-integrand control.
#[derive(Debug, Clone)]
pub struct DualReport {
    /// MC estimate of `E[M(1)]`.
    pub x: f64,
    /// The trivial representation constant.
    pub y: f64,
    /// `(y - x) / se`.
    pub separation_in_se: f64,
    /// Mean of `int X^2 dt` at the coarse and fine refinements.
    pub x_sq_means: (f64, f64),
    /// MC mean of the Doleans-Dade exponent of the constant integrand 1
    /// (a true martingale; should sit at 1 within MC error).
    pub control_mean: f64,
    pub control_se: f64,
}

pub fn dual_representation_report(
    rng: &CounterRng,
    paths: u64,
    coarse_steps: usize,
    fine_steps: usize,
    eps: f64,
) -> Result<DualReport> {
    if fine_steps % coarse_steps != 0 {
        return Err(LabError::InvalidGrid(format!(
            "refinements must nest: {fine_steps} is not a multiple of {coarse_steps}"
        )));
    }
    let gap = expectation_gap(rng, paths, fine_steps, eps)?;
    // the coarse geometric grid is exactly the fine one subsampled (same
    // ratio raised to the stride), so both refinements can share one
    // Brownian path per sample: the growth of int X^2 dt is then a pure
    // resolution effect, not noise
    let stride = fine_steps / coarse_steps;
    let fine_nodes = geometric_grid(fine_steps, eps)?;
    let coarse_nodes: Vec<f64> = fine_nodes.iter().copied().step_by(stride).collect();
    let coarse: Vec<CounterexamplePath> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let db_fine: Vec<f64> = fine_nodes
                .windows(2)
                .enumerate()
                .map(|(i, w)| (w[1] - w[0]).sqrt() * rng.standard_normal(p, i as u64, 0))
                .collect();
            let db_coarse: Vec<f64> =
                db_fine.chunks(stride).map(|c| c.iter().sum()).collect();
            let mut out = counterexample_from_increments(&coarse_nodes, &db_coarse);
            out.path = p;
            out
        })
        .collect();
    let m = paths.max(1) as f64;
    let coarse_x_sq = coarse.iter().map(|s| s.x_sq_integral).sum::<f64>() / m;
    let fine_x_sq = gap.paths.iter().map(|s| s.x_sq_integral).sum::<f64>() / m;

    // control: exponent of the constant integrand 1 on the same grid;
    // int 1 dB telescopes to B at the last node, so the sum is exact
    let nodes = geometric_grid(fine_steps, eps)?;
    let horizon = *nodes.last().expect("nonempty");
    let controls: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let b: f64 = nodes
                .windows(2)
                .enumerate()
                .map(|(i, w)| (w[1] - w[0]).sqrt() * rng.standard_normal(p, i as u64, 1))
                .sum();
            (b - 0.5 * horizon).exp()
        })
        .collect();
    let control_mean = controls.iter().sum::<f64>() / m;
    let control_var = controls.iter().map(|c| (c - control_mean) * (c - control_mean)).sum::<f64>()
        / (m - 1.0).max(1.0);

    Ok(DualReport {
        x: gap.mean_m1,
        y: 1.0,
        separation_in_se: (1.0 - gap.mean_m1) / gap.se.max(f64::MIN_POSITIVE),
        x_sq_means: (coarse_x_sq, fine_x_sq),
        control_mean,
        control_se: (control_var / m).sqrt(),
    })
}
