//! Command-line front end: `train`, `sweep`, `check` and `measure`.
//!
//! Exit codes: 0 success, 1 invalid input (configuration, grid, files),
//! 2 failure while running.

mod config;
mod sweep;

pub use config::{DataConfig, DatasetKind, RunConfig};
pub use sweep::{cmd_sweep, parse_grid, GridAxis, SweepOutcome, FAILURES_CSV, SUMMARY_CSV};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checks::{run_checks, CheckRoutes};
use crate::data::{load_features_csv, Domain};
use crate::discrepancy::{Discrepancy, KernelConfig};
use crate::error::{HommError, Result};
use crate::moments::{sample_indices, FeatureBatch, MomentOrder};
use crate::network::checkpoint::to_bytes;
use crate::trainer::{run_experiment_with, Evaluation, LossVariant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "homm", version, about = "Higher-order moment matching for domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write manifest, metrics log and checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train once per point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// For example "p=1,2,3;lambda_d=1e3,1e4".
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Run grid points on several threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Run the equivalence, Monte-Carlo and gradient self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print discrepancies between two feature files as JSON.
    Measure {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated: full, group, sampled, kernelized, mmd, gram, coral.
        #[arg(long, value_delimiter = ',', required = true)]
        losses: Vec<String>,
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long = "N", default_value_t = 1000)]
        n_samples: usize,
        #[arg(long, default_value_t = 1e-4)]
        gamma: f64,
        #[arg(long, default_value_t = 2)]
        kernel_exponent: u8,
        #[arg(long = "n-g", default_value_t = 1)]
        n_g: usize,
        /// Seed of the sampled index matrix.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Invalid(HommError),
    Runtime(HommError),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn error(&self) -> &HommError {
        match self {
            Failure::Invalid(e) | Failure::Runtime(e) => e,
        }
    }
}

fn invalid(e: HommError) -> Failure {
    Failure::Invalid(e)
}

fn runtime(e: HommError) -> Failure {
    Failure::Runtime(e)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Check { seed } => return cmd_check(seed),
        Command::Train { config, out } => cmd_train(&config, &out).map(|_| EXIT_OK),
        Command::Sweep { config, grid, out, parallel } => {
            cmd_sweep(&config, &grid, &out, parallel).map(|s| {
                if s.failures.is_empty() {
                    EXIT_OK
                } else {
                    EXIT_RUNTIME
                }
            })
        }
        Command::Measure { source, target, losses, p, n_samples, gamma, kernel_exponent, n_g, seed } => {
            let request = MeasureRequest { losses, p, n_samples, gamma, kernel_exponent, n_g, seed };
            cmd_measure(&source, &target, &request).map(|values| {
                println!("{}", serde_json::to_string(&values).expect("finite values serialize"));
                EXIT_OK
            })
        }
    };
    result.unwrap_or_else(|f| {
        eprintln!("error: {}", f.error());
        f.exit_code()
    })
}

/// Written to `manifest.toml` before training starts and never rewritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub seed: u64,
    pub dataset: String,
    pub started_unix: u64,
    pub config: RunConfig,
}

/// Written to `run_summary.json` after training ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub finished_unix: u64,
    pub steps: usize,
    pub source: Evaluation,
    pub target: Evaluation,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "run_summary.json";

/// Trains from a configuration file into `out`.
pub fn cmd_train(config_path: &Path, out: &Path) -> std::result::Result<RunSummary, Failure> {
    let config = RunConfig::load(config_path).map_err(invalid)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    train_config(&config, base, out)
}

/// Trains from an already parsed configuration; CSV paths resolve against `base`.
pub fn train_config(config: &RunConfig, base: &Path, out: &Path) -> std::result::Result<RunSummary, Failure> {
    config.validate().map_err(invalid)?;
    let (source, target) = config.data.load(base).map_err(invalid)?;
    fs::create_dir_all(out).map_err(|e| runtime(e.into()))?;

    let manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.train.seed,
        dataset: config.data.describe(),
        started_unix: unix_now(),
        config: config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| runtime(HommError::contract(e.to_string())))?;
    fs::write(out.join(MANIFEST_FILE), text).map_err(|e| runtime(e.into()))?;

    let mut log = BufWriter::new(File::create(out.join(METRICS_FILE)).map_err(|e| runtime(e.into()))?);
    let outcome = run_experiment_with(&config.train, &source, &target, |record| {
        serde_json::to_writer(&mut log, record).map_err(|e| HommError::Io(e.into()))?;
        log.write_all(b"\n")?;
        Ok(())
    })
    .map_err(runtime)?;
    log.flush().map_err(|e| runtime(e.into()))?;

    fs::write(out.join(CHECKPOINT_FILE), to_bytes(&outcome.network)).map_err(|e| runtime(e.into()))?;
    let summary = RunSummary {
        finished_unix: unix_now(),
        steps: config.train.total_steps,
        source: outcome.source,
        target: outcome.target,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(out.join(SUMMARY_FILE), json).map_err(|e| runtime(e.into()))?;
    Ok(summary)
}

/// Prints one line per self-check and returns 0 iff all pass.
pub fn cmd_check(seed: u64) -> i32 {
    cmd_check_with(&CheckRoutes::default(), seed, &mut std::io::stdout())
}

pub fn cmd_check_with(routes: &CheckRoutes, seed: u64, out: &mut impl Write) -> i32 {
    let results = run_checks(routes, seed);
    let mut all = true;
    for r in &results {
        all &= r.passed;
        let _ = writeln!(out, "{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} of {} properties passed", results.len() - failed, results.len());
    if all {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}

/// Options of `homm measure`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRequest {
    pub losses: Vec<String>,
    pub p: u32,
    pub n_samples: usize,
    pub gamma: f64,
    pub kernel_exponent: u8,
    pub n_g: usize,
    pub seed: u64,
}

impl Default for MeasureRequest {
    fn default() -> Self {
        Self {
            losses: vec!["full".into()],
            p: 3,
            n_samples: 1000,
            gamma: 1e-4,
            kernel_exponent: 2,
            n_g: 1,
            seed: 0,
        }
    }
}

fn parse_variant(name: &str) -> Result<LossVariant> {
    let value = toml::Value::String(name.trim().to_string());
    value
        .try_into()
        .map_err(|_| HommError::config("losses", format!("unknown loss {name:?}")))
}

/// Discrepancies between the rows of two feature files, keyed by loss name.
pub fn cmd_measure(
    source: &Path,
    target: &Path,
    request: &MeasureRequest,
) -> std::result::Result<BTreeMap<String, f64>, Failure> {
    let variants = request
        .losses
        .iter()
        .map(|n| parse_variant(n))
        .collect::<Result<Vec<_>>>()
        .map_err(invalid)?;
    let s = load_features_csv(source, Domain::Source).map_err(invalid)?;
    let t = load_features_csv(target, Domain::Target).map_err(invalid)?;
    if s.dim() != t.dim() {
        return Err(invalid(HommError::Format {
            path: target.to_path_buf(),
            message: format!("width {} differs from source width {}", t.dim(), s.dim()),
        }));
    }
    let s = FeatureBatch::new(s.features().to_owned()).map_err(invalid)?;
    let t = FeatureBatch::new(t.features().to_owned()).map_err(invalid)?;
    let order = MomentOrder(request.p);
    let kernel = KernelConfig::new(request.gamma, request.kernel_exponent).map_err(invalid)?;
    let indices = if variants.iter().any(|v| v.uses_indices()) {
        Some(sample_indices(s.width(), order, request.n_samples, request.seed).map_err(invalid)?)
    } else {
        None
    };

    let mut values = BTreeMap::new();
    for variant in variants {
        let d = match variant {
            LossVariant::Full => Discrepancy::Full { order },
            LossVariant::Group => Discrepancy::Group { order, n_groups: request.n_g },
            LossVariant::Sampled => Discrepancy::Sampled { indices: indices.as_ref().expect("drawn above") },
            LossVariant::Kernelized => {
                Discrepancy::Kernelized { indices: indices.as_ref().expect("drawn above"), kernel }
            }
            LossVariant::Mmd => Discrepancy::LinearMmd,
            LossVariant::Gram => Discrepancy::Gram,
            LossVariant::Coral => Discrepancy::Coral,
        };
        let value = d.value(&s, &t).map_err(invalid)?;
        values.insert(variant.name().to_string(), value);
    }
    Ok(values)
}
