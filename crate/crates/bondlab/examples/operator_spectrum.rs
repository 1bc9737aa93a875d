//! Assembles the bond-price diffusion operator at several times and prints
//! its singular values, Hilbert-Schmidt norm, and the pathwise column bound.

use bondlab::market::{simulate_forward_surface, SimulateOptions};
use bondlab::operator::{assemble_gamma, hs_norm, proposition1_report, spectrum};
use bondlab::volatility::VolatilitySpec;
use bondlab::{CounterRng, TimeGrid};

fn main() {
    let grid = TimeGrid::new(1.0, 100).expect("valid grid");
    let n = 8;
    let spec = VolatilitySpec::SineGaussian {
        gammas: (1..=n).map(|j| 1.0 / j as f64).collect(),
    };
    let initial = vec![0.03; grid.len()];
    let rng = CounterRng::new(7);
    let surface =
        simulate_forward_surface(&spec, &grid, n, &initial, &rng, 0, SimulateOptions::default())
            .expect("simulation");

    for &k in &[0, 25, 50] {
        let gamma = assemble_gamma(&surface, &spec, k).expect("assembly");
        let sd = spectrum(&gamma).expect("spectrum");
        println!(
            "t = {:.2}: ||Gamma||_HS = {:.6}, rank = {}, lambda_1 = {:.4e}, lambda_{} = {:.4e}",
            grid.node(k),
            hs_norm(&gamma),
            sd.rank,
            sd.lambdas[0],
            n,
            sd.lambdas[n - 1],
        );
    }

    // the squared G-norm of every operator column is controlled by the
    // H-norm of the generating volatility, uniformly along the path
    let report = proposition1_report(&surface, &spec, 10.0).expect("report");
    println!("sup |f(t,.)|_H = {:.6}, sup |P^| = {:.6}", report.sup_f_h_norm, report.sup_discounted);
    println!("worst column excess / dt = {:.4e}", report.worst_excess_over_dt);
    println!("violations beyond slack: {}", report.violations.len());
    println!("sum_k ||Gamma||_HS^2 dt = {:.6}", report.hs_time_integral);
}
