//! The special cases of moment matching on one random pair of batches:
//! first order is the linear MMD, second order is Gram matching, exhaustive
//! index sampling is exact, and the first-order kernelized loss is a kernel MMD.
//!
//! cargo run --example discrepancy_equivalences

use homm::discrepancy::{gram_loss, homm_full, homm_sampled, kernel_mmd, khomm, linear_mmd, KernelConfig};
use homm::moments::{FeatureBatch, IndexMatrix, MomentOrder};
use homm::rng::SplitMix64;
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = SplitMix64::new(1);
    let mut batch = |b, l| FeatureBatch::new(Array2::from_shape_fn((b, l), |_| rng.uniform(-1.0, 1.0)));
    let s = batch(24, 6)?;
    let t = batch(24, 6)?;

    println!("p=1 HoMM     {:.15e}", homm_full(&s, &t, MomentOrder(1))?);
    println!("linear MMD   {:.15e}", linear_mmd(&s, &t)?);
    println!("p=2 HoMM     {:.15e}", homm_full(&s, &t, MomentOrder(2))?);
    println!("Gram         {:.15e}", gram_loss(&s, &t, false)?);
    for p in 1..=3 {
        let idx = IndexMatrix::exhaustive(6, MomentOrder(p))?;
        println!(
            "p={p} exact {:.15e}  exhaustive sampled {:.15e}",
            homm_full(&s, &t, MomentOrder(p))?,
            homm_sampled(&s, &t, &idx)?
        );
    }
    let kernel = KernelConfig::gaussian(0.5)?;
    let idx = IndexMatrix::exhaustive(6, MomentOrder(1))?;
    println!("p=1 KHoMM    {:.15e}", khomm(&s, &t, &idx, kernel)?);
    println!("kernel MMD   {:.15e}", kernel_mmd(&s, &t, kernel)?);
    Ok(())
}
