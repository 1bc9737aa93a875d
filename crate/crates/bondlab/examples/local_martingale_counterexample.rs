//! Monte Carlo view of a strict local martingale: the stopped exponential
//! starts at 1, its terminal value is trapped in (0, e^{-1}), and the same
//! bounded terminal value therefore carries two different representation
//! constants. Admissibility (a true martingale wealth process) is what rules
//! this out for hedging.

use bondlab::counterexample::{dual_representation_report, expectation_gap};
use bondlab::CounterRng;

fn main() {
    let rng = CounterRng::new(42);
    let paths = 2000;
    let steps = 10_000;

    let gap = expectation_gap(&rng, paths, steps, 1e-8).expect("simulation");
    println!("E[M(1)] = {:.6} +- {:.6} (99% CI [{:.6}, {:.6}])", gap.mean_m1, gap.se, gap.ci99.0, gap.ci99.1);
    println!("e^-1 = {:.6}, M(0) = 1", (-1.0f64).exp());
    println!("paths with L < -1 + 0.05: {:.1}%", 100.0 * gap.frac_l_below);
    println!("paths with M(1) > 0: {:.1}%", 100.0 * gap.frac_m1_positive);

    let dual = dual_representation_report(&rng, paths, steps / 10, steps, 1e-8)
        .expect("dual report");
    println!();
    println!("representation constants: x = {:.6}, y = {:.6}", dual.x, dual.y);
    println!("separation: {:.1} standard errors", dual.separation_in_se);
    println!(
        "bounded-integrand control mean = {:.6} +- {:.6} (a true martingale)",
        dual.control_mean, dual.control_se
    );
    println!(
        "int X^2 dt means: coarse grid {:.2}, fine grid {:.2} (the integrand blows up near t = 1)",
        dual.x_sq_means.0, dual.x_sq_means.1
    );
}
