//! Hedges an exponential-martingale claim with generalized strategies in the
//! injective sine-volatility model and shows the terminal error shrinking
//! under time refinement.

use bondlab::completeness::{replicate_claim, Claim};
use bondlab::volatility::VolatilitySpec;
use bondlab::{CounterRng, TimeGrid};

fn main() {
    let n = 4;
    let claim = Claim::ExpMartingale { a: 0.5, factor: 0 };
    let rng = CounterRng::new(42);
    let paths = 500;

    println!("{:>6} {:>10} {:>14} {:>16}", "steps", "dt", "rms_error", "max_linearized");
    for steps in [50usize, 100, 200] {
        let grid = TimeGrid::new(1.0, steps).expect("valid grid");
        let spec = VolatilitySpec::SineGaussian {
            gammas: (1..=n).map(|j| 1.0 / j as f64).collect(),
        };
        let initial = vec![0.03; grid.len()];
        let report = replicate_claim(&spec, &grid, n, claim, &initial, &rng, paths)
            .expect("replication");
        println!(
            "{steps:>6} {:>10.5} {:>14.6} {:>16.3e}",
            grid.dt(),
            report.rms_error,
            report.max_linearized_error
        );
    }
    println!("\ninitial capital is the claim mean (1); the per-step identity");
    println!("between the strategy applied to the diffusion increment and the");
    println!("integrand applied to the factor shock holds to machine scale.");
}
