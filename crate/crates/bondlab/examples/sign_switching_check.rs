//! Runs the sign-switching model admissibility checks: rates stay
//! nonnegative, discounted bonds stay below one, and every attainable
//! integrand lives inside a fixed L^2 ball, which is why this market cannot
//! replicate arbitrary claims.

use bondlab::incompleteness::{basel_partial, default_sign_switching, sign_switching_admissibility};
use bondlab::{CounterRng, TimeGrid};

fn main() {
    let grid = TimeGrid::new(1.0, 50).expect("valid grid");
    let n = 50;
    let spec = default_sign_switching(&grid, n, 0.005);
    let initial = vec![0.03; grid.len()];
    let rng = CounterRng::new(42);

    let report = sign_switching_admissibility(&spec, &grid, n, &initial, &rng, 200)
        .expect("admissibility run");

    println!("ball radius: horizon^2 * sum 1/i^2 = {:.6}", report.bound_constant);
    println!("(at n = 100 the partial sum is {:.4})", basel_partial(100));
    println!();
    println!("{:<40} {:>6} {:>14}", "check", "pass", "margin");
    for c in &report.checks {
        println!("{:<40} {:>6} {:>14.6e}", c.name, c.passed, c.margin);
    }
    println!();
    println!("all passed: {}", report.all_passed());
}
