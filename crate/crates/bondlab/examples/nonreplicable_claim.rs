//! Builds the bounded claim that no square-summable portfolio replicates and
//! samples it over many paths: the claim stays inside the barrier (plus a
//! one-step overshoot) while its replication cost diverges.

use bondlab::incompleteness::{build_psi_tilde, sample_claims, SpectrumMode};
use bondlab::market::{simulate_forward_surface, SimulateOptions};
use bondlab::operator::{assemble_gamma, spectrum};
use bondlab::volatility::VolatilitySpec;
use bondlab::{CounterRng, TimeGrid};

fn main() {
    let grid = TimeGrid::new(1.0, 100).expect("valid grid");
    let n = 16;
    let spec = VolatilitySpec::SineGaussian {
        gammas: (1..=n).map(|j| 1.0 / j as f64).collect(),
    };
    let initial = vec![0.03; grid.len()];
    let rng = CounterRng::new(42);

    // the integrand: 1/k at the k-th index whose inverse singular value has
    // grown past the threshold
    let surface =
        simulate_forward_surface(&spec, &grid, n, &initial, &rng, 0, SimulateOptions::default())
            .expect("simulation");
    let gamma = assemble_gamma(&surface, &spec, 0).expect("assembly");
    let sd = spectrum(&gamma).expect("spectrum");
    let psi = build_psi_tilde(&sd).expect("integrand");
    println!("selected indices (1-based): {:?}", psi.indices.iter().map(|i| i + 1).collect::<Vec<_>>());
    println!("|psi|^2 = {:.6} (cap pi^2/6 = {:.6})", psi.norm_sq(), std::f64::consts::PI.powi(2) / 6.0);

    let paths = 2000;
    let samples = sample_claims(&spec, &grid, n, &initial, &rng, paths, SpectrumMode::Pointwise)
        .expect("sampling");
    let m = samples.len() as f64;
    let mean = samples.iter().map(|s| s.xi).sum::<f64>() / m;
    let stopped = samples.iter().filter(|s| s.tau < 1.0).count();
    let max_abs = samples.iter().map(|s| s.xi.abs()).fold(0.0f64, f64::max);
    let max_overshoot = samples.iter().map(|s| s.overshoot).fold(0.0f64, f64::max);
    println!("{paths} paths: mean xi = {mean:.5}, stopped on {stopped}");
    println!("max |xi| = {max_abs:.5} (barrier 1 + overshoot, max overshoot {max_overshoot:.5})");
}
