//! Random-sampling estimate of third-order matching converging to the exact
//! value as the number of sampled tensor entries grows.
//!
//! cargo run --release --example sampled_convergence

use homm::checks::{monte_carlo_study, CheckRoutes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let counts = [10, 100, 1_000, 10_000, 100_000];
    let (exact, points) = monte_carlo_study(&CheckRoutes::default(), 7, &counts, 20)?;
    println!("exact value {exact:.6e} (b = 32, L = 16, p = 3)");
    println!("{:>8} {:>14} {:>12} {:>12}", "N", "mean", "std error", "rms error");
    for p in points {
        println!("{:>8} {:>14.6e} {:>12.3e} {:>12.3e}", p.n_samples, p.mean, p.standard_error, p.rms_error);
    }
    Ok(())
}
