//! Group moment matching: splitting a wide adapted layer into groups keeps
//! the tensor small enough to compute where the full tensor is refused.
//!
//! cargo run --release --example group_matching

use homm::discrepancy::{homm_full, homm_group};
use homm::moments::{FeatureBatch, MomentOrder};
use homm::rng::SplitMix64;
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SplitMix64::new(5);
    let width = 256;
    let s = FeatureBatch::new(Array2::from_shape_fn((32, width), |_| rng.uniform(-1.0, 1.0)))?;
    let t = FeatureBatch::new(Array2::from_shape_fn((32, width), |_| rng.uniform(-1.0, 1.0) + 0.1))?;
    let p = MomentOrder(4);
    match homm_full(&s, &t, p) {
        Ok(v) => println!("full p=4: {v:.4e}"),
        Err(e) => println!("full p=4 refused: {e}"),
    }
    for n_g in [8, 16, 32, 64] {
        println!(
            "{n_g:>3} groups of width {:>3}: {:.4e}",
            width / n_g,
            homm_group(&s, &t, p, n_g)?
        );
    }
    Ok(())
}
