//! Writing two feature sets to CSV and measuring several discrepancies
//! between them, as `homm measure` does.
//!
//! cargo run --example measure_features

use homm::cli::{cmd_measure, MeasureRequest};
use homm::data::{gen_gaussian_mixture_pair, write_features_csv, ShiftSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("homm_measure_example");
    std::fs::create_dir_all(&dir)?;
    let spec = ShiftSpec { rotation: 40f64.to_radians(), samples_per_class: 100, ..Default::default() };
    let (source, target) = gen_gaussian_mixture_pair(&spec)?;
    let (s_path, t_path) = (dir.join("source.csv"), dir.join("target.csv"));
    write_features_csv(&source, &s_path)?;
    write_features_csv(&target, &t_path)?;

    let request = MeasureRequest {
        losses: ["full", "sampled", "kernelized", "mmd", "gram", "coral"].map(String::from).to_vec(),
        ..Default::default()
    };
    let values = cmd_measure(&s_path, &t_path, &request).map_err(|f| f.error().to_string())?;
    for (name, value) in values {
        println!("{name:<12} {value:.6e}");
    }
    Ok(())
}
