//! Adapting a classifier from two moons to a rotated copy, printing the
//! metrics log as JSON lines.
//!
//! cargo run --release --example two_moons_adaptation

use homm::data::{gen_two_moons_pair, ShiftSpec};
use homm::trainer::{run_experiment_with, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ShiftSpec {
        rotation: 30f64.to_radians(),
        class_count: 2,
        samples_per_class: 300,
        noise_std: 0.1,
        radius: 1.0,
        ..Default::default()
    };
    let (source, target) = gen_two_moons_pair(&spec)?;
    let config = TrainConfig {
        lambda_d: 300.0,
        total_steps: 1500,
        warmup_steps: 750,
        log_every: 250,
        eval_every: 500,
        ..Default::default()
    };
    let outcome = run_experiment_with(&config, &source, &target, |record| {
        println!("{}", serde_json::to_string(record).expect("metrics serialize"));
        Ok(())
    })?;
    println!("source accuracy {:.3}, target accuracy {:.3}", outcome.source.accuracy, outcome.target.accuracy);
    Ok(())
}
