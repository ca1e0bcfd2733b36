//! The equivalence, Monte-Carlo and gradient self-checks, as printed by
//! `homm check`.
//!
//! cargo run --release --example self_checks [seed]

use homm::checks::{run_checks, CheckRoutes};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let results = run_checks(&CheckRoutes::default(), seed);
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} of {} properties passed", results.len());
}
