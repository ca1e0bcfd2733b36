use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::{invalid, runtime, train_config, Failure, RunSummary};
use crate::error::{HommError, Result};

/// One swept key and its values, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

fn parse_value(key: &str, text: &str) -> Result<toml::Value> {
    let doc: toml::Table = format!("v = {text}")
        .parse()
        .map_err(|_| HommError::config(key, format!("cannot parse value {text:?}")))?;
    Ok(doc["v"].clone())
}

/// Parses `"p=1,2,3;lambda_d=1e3,1e4"` into axes. Keys must be
/// configuration keys; an empty grid is an error.
pub fn parse_grid(spec: &str) -> Result<Vec<GridAxis>> {
    let known = RunConfig::known_keys();
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| HommError::config("grid", format!("expected key=values, got {part:?}")))?;
        let key = key.trim();
        if !known.iter().any(|k| k == key) {
            return Err(HommError::config("grid", format!("unknown key {key:?}")));
        }
        if axes.iter().any(|a: &GridAxis| a.key == key) {
            return Err(HommError::config("grid", format!("key {key:?} given twice")));
        }
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| parse_value(key, v))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(HommError::config("grid", format!("no values for {key:?}")));
        }
        axes.push(GridAxis { key: key.to_string(), values });
    }
    if axes.is_empty() {
        return Err(HommError::config("grid", "empty sweep"));
    }
    Ok(axes)
}

/// Cartesian product of the axes, last axis varying fastest.
fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, toml::Value)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    points
}

fn show(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub points: usize,
    pub completed: Vec<(usize, RunSummary)>,
    pub failures: Vec<(usize, String)>,
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const FAILURES_CSV: &str = "failures.csv";

pub fn cmd_sweep(config_path: &Path, grid: &str, out: &Path, parallel: bool) -> std::result::Result<SweepOutcome, Failure> {
    let axes = parse_grid(grid).map_err(invalid)?;
    let text = fs::read_to_string(config_path).map_err(|e| invalid(e.into()))?;
    let base_table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| invalid(HommError::config("config", e.to_string())))?;
    RunConfig::from_table(base_table.clone()).map_err(invalid)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out).map_err(|e| runtime(e.into()))?;

    let points = grid_points(&axes);
    let run_point = |(i, point): (usize, &Vec<(String, toml::Value)>)| {
        let mut table = base_table.clone();
        for (k, v) in point {
            table.insert(k.clone(), v.clone());
        }
        let result = RunConfig::from_table(table)
            .map_err(invalid)
            .and_then(|config| train_config(&config, base, &out.join(format!("point_{i:03}"))));
        (i, result.map_err(|f| f.error().to_string()))
    };
    let results: Vec<_> = if parallel {
        points.par_iter().enumerate().map(run_point).collect()
    } else {
        points.iter().enumerate().map(run_point).collect()
    };

    let mut summary = csv::Writer::from_path(out.join(SUMMARY_CSV)).map_err(|e| runtime(csv_error(e)))?;
    let mut failures = csv::Writer::from_path(out.join(FAILURES_CSV)).map_err(|e| runtime(csv_error(e)))?;
    let mut header = vec!["point".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    let mut summary_header = header.clone();
    summary_header.extend(["source_accuracy".into(), "target_accuracy".into()]);
    summary.write_record(&summary_header).map_err(|e| runtime(csv_error(e)))?;
    header.push("error".into());
    failures.write_record(&header).map_err(|e| runtime(csv_error(e)))?;

    let mut outcome = SweepOutcome { points: points.len(), completed: Vec::new(), failures: Vec::new() };
    for (i, result) in results {
        let mut row = vec![format!("point_{i:03}")];
        row.extend(points[i].iter().map(|(_, v)| show(v)));
        match result {
            Ok(s) => {
                row.push(s.source.accuracy.to_string());
                row.push(s.target.accuracy.to_string());
                summary.write_record(&row).map_err(|e| runtime(csv_error(e)))?;
                outcome.completed.push((i, s));
            }
            Err(message) => {
                eprintln!("point_{i:03} failed: {message}");
                row.push(message.clone());
                failures.write_record(&row).map_err(|e| runtime(csv_error(e)))?;
                outcome.failures.push((i, message));
            }
        }
    }
    summary.flush().map_err(|e| runtime(e.into()))?;
    failures.flush().map_err(|e| runtime(e.into()))?;
    Ok(outcome)
}

fn csv_error(e: csv::Error) -> HommError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HommError::Io(io),
        other => HommError::contract(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let axes = parse_grid("p=1,2,3; lambda_d=1e3,1e4").unwrap();
        assert_eq!(axes.len(), 2);
        assert_eq!(axes[0].values, vec![toml::Value::Integer(1), toml::Value::Integer(2), toml::Value::Integer(3)]);
        assert_eq!(axes[1].values[0], toml::Value::Float(1e3));
        assert_eq!(grid_points(&axes).len(), 6);
        let v = parse_grid("loss_variant=\"full\",\"gram\"").unwrap();
        assert_eq!(v[0].values[1], toml::Value::String("gram".into()));
    }

    #[test]
    fn bad_grids() {
        for spec in ["", " ; ", "p", "q=1", "p=", "p=1;p=2", "p=1,,x y"] {
            assert!(parse_grid(spec).is_err(), "{spec:?}");
        }
        assert!(parse_grid("").unwrap_err().to_string().contains("empty sweep"));
    }
}
