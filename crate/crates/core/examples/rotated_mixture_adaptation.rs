//! Source-only training against first- and third-order moment matching, with
//! and without the clustering term, on a rotated three-class mixture.
//!
//! cargo run --release --example rotated_mixture_adaptation [steps]

use homm::data::{gen_gaussian_mixture_pair, ShiftSpec};
use homm::trainer::{run_experiment, LossVariant, TrainConfig};
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let spec = ShiftSpec {
        rotation: 40f64.to_radians(),
        noise_std: 0.8,
        radius_step: 0.75,
        ..Default::default()
    };
    let (source, target) = gen_gaussian_mixture_pair(&spec)?;

    let methods = [
        ("source only", 3, 0.0, 0.0),
        ("p=1", 1, 300.0, 0.0),
        ("p=3", 3, 300.0, 0.0),
        ("p=3 + clustering", 3, 300.0, 0.1),
    ];
    for (name, p, lambda_d, lambda_dc) in methods {
        let accs = (0..5u64)
            .into_par_iter()
            .map(|seed| {
                let config = TrainConfig {
                    loss_variant: LossVariant::Full,
                    p,
                    lambda_d,
                    lambda_dc,
                    warmup_steps: steps / 2,
                    total_steps: steps,
                    log_every: steps,
                    eval_every: steps,
                    seed,
                    ..Default::default()
                };
                run_experiment(&config, &source, &target).map(|o| o.target.accuracy)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let sd = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt();
        let shown: Vec<String> = accs.iter().map(|a| format!("{a:.3}")).collect();
        println!("{name:<18} target accuracy {mean:.4} +- {sd:.4}  [{}]", shown.join(", "));
    }
    Ok(())
}
