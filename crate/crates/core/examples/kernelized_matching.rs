//! Kernelized moment matching as a function of the kernel bandwidth, next to
//! the sampled linear estimate on the same index matrix.
//!
//! cargo run --example kernelized_matching

use homm::discrepancy::{homm_sampled, khomm, KernelConfig};
use homm::moments::{sample_indices, FeatureBatch, MomentOrder};
use homm::rng::SplitMix64;
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SplitMix64::new(3);
    let s = FeatureBatch::new(Array2::from_shape_fn((64, 16), |_| rng.uniform(-1.0, 1.0)))?;
    // The target is the source with a skewed perturbation: equal means,
    // different third moments.
    let t = FeatureBatch::new(s.view().mapv(|v| v + 0.3 * (v * v - 1.0 / 3.0)))?;
    let idx = sample_indices(16, MomentOrder(3), 1000, 4)?;
    println!("sampled p=3 HoMM {:.4e}", homm_sampled(&s, &t, &idx)?);
    for gamma in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        for exponent in [1, 2] {
            let kernel = KernelConfig::new(gamma, exponent)?;
            println!("gamma {gamma:<7} exponent {exponent}: KHoMM {:.4e}", khomm(&s, &t, &idx, kernel)?);
        }
    }
    Ok(())
}
