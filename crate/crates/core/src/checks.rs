//! Self-checks of the discrepancy and gradient code on randomized small
//! instances, as run by `homm check`.
//!
//! The loss functions under test are reached through [`CheckRoutes`], so a
//! deliberately broken implementation can be substituted and must be caught.

use std::fmt;

use ndarray::Array2;

use crate::discrepancy::{
    gram_loss, homm_full, homm_sampled, kernel_mmd, khomm, linear_mmd, ClassCenters, Discrepancy,
    KernelConfig, PseudoLabel, PseudoLabelAssignment,
};
use crate::error::Result;
use crate::moments::{sample_indices, FeatureBatch, IndexMatrix, MomentOrder};
use crate::network::{
    backward, finite_diff_check, objective, relative_error, ClusteringTerm, LossConfig,
    MlpNetwork, StepBatch,
};
use crate::rng::{derive_seed, SplitMix64};

type PairFn = fn(&FeatureBatch, &FeatureBatch) -> Result<f64>;

/// The implementations exercised by [`run_checks`].
#[derive(Clone, Copy)]
pub struct CheckRoutes {
    pub homm_full: fn(&FeatureBatch, &FeatureBatch, MomentOrder) -> Result<f64>,
    pub linear_mmd: PairFn,
    pub gram_loss: fn(&FeatureBatch, &FeatureBatch, bool) -> Result<f64>,
    pub homm_sampled: fn(&FeatureBatch, &FeatureBatch, &IndexMatrix) -> Result<f64>,
    pub khomm: fn(&FeatureBatch, &FeatureBatch, &IndexMatrix, KernelConfig) -> Result<f64>,
    pub kernel_mmd: fn(&FeatureBatch, &FeatureBatch, KernelConfig) -> Result<f64>,
}

impl Default for CheckRoutes {
    fn default() -> Self {
        Self {
            homm_full,
            linear_mmd,
            gram_loss,
            homm_sampled,
            khomm,
            kernel_mmd,
        }
    }
}

/// Outcome of one property.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// The worst measured value of the property's statistic.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.3e} (tolerance {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

/// Relative error of two values that should agree, 0 when both are 0.
pub fn agreement(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        relative_error(a, b, f64::MIN_POSITIVE)
    }
}

pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;
pub const EQUIVALENCE_TRIALS: usize = 100;

fn uniform_batch(rng: &mut SplitMix64, rows: usize, width: usize) -> FeatureBatch {
    FeatureBatch::new(Array2::from_shape_fn((rows, width), |_| rng.uniform(-1.0, 1.0)))
        .expect("finite entries")
}

/// Worst agreement of `trial` over `EQUIVALENCE_TRIALS` random instances.
fn equivalence(
    name: &'static str,
    detail: &str,
    seed: u64,
    mut trial: impl FnMut(&mut SplitMix64) -> Result<(f64, f64)>,
) -> PropertyResult {
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0_f64;
    for _ in 0..EQUIVALENCE_TRIALS {
        match trial(&mut rng) {
            Ok((a, b)) => worst = worst.max(agreement(a, b)),
            Err(e) => {
                return PropertyResult {
                    name,
                    passed: false,
                    measured: f64::NAN,
                    tolerance: EQUIVALENCE_TOLERANCE,
                    detail: format!("error: {e}"),
                }
            }
        }
    }
    PropertyResult {
        name,
        passed: worst <= EQUIVALENCE_TOLERANCE,
        measured: worst,
        tolerance: EQUIVALENCE_TOLERANCE,
        detail: detail.to_string(),
    }
}

fn dims(rng: &mut SplitMix64, max_width: u64) -> (usize, usize) {
    (2 + rng.below(63) as usize, 2 + rng.below(max_width - 1) as usize)
}

pub fn equivalence_a(routes: &CheckRoutes, seed: u64) -> PropertyResult {
    equivalence("equivalence A", "(first-order HoMM vs linear MMD)", seed, |rng| {
        let (bs, width) = dims(rng, 16);
        let bt = 2 + rng.below(63) as usize;
        let s = uniform_batch(rng, bs, width);
        let t = uniform_batch(rng, bt, width);
        Ok(((routes.homm_full)(&s, &t, MomentOrder(1))?, (routes.linear_mmd)(&s, &t)?))
    })
}

pub fn equivalence_b(routes: &CheckRoutes, seed: u64) -> PropertyResult {
    equivalence("equivalence B", "(second-order HoMM vs Gram matching)", seed, |rng| {
        let (b, width) = dims(rng, 16);
        let s = uniform_batch(rng, b, width);
        let t = uniform_batch(rng, b, width);
        Ok(((routes.homm_full)(&s, &t, MomentOrder(2))?, (routes.gram_loss)(&s, &t, false)?))
    })
}

pub fn equivalence_c(routes: &CheckRoutes, seed: u64) -> PropertyResult {
    equivalence("equivalence C", "(exhaustive sampled HoMM vs full HoMM, p <= 3)", seed, |rng| {
        let (b, width) = dims(rng, 8);
        let p = MomentOrder(1 + rng.below(3) as u32);
        let s = uniform_batch(rng, b, width);
        let t = uniform_batch(rng, b, width);
        let idx = IndexMatrix::exhaustive(width, p)?;
        Ok(((routes.homm_sampled)(&s, &t, &idx)?, (routes.homm_full)(&s, &t, p)?))
    })
}

pub fn equivalence_d(routes: &CheckRoutes, seed: u64) -> PropertyResult {
    equivalence("equivalence D", "(first-order kernelized HoMM vs kernel MMD)", seed, |rng| {
        let (b, width) = dims(rng, 16);
        let s = uniform_batch(rng, b, width);
        let t = uniform_batch(rng, b, width);
        let kernel = KernelConfig::new(rng.uniform(0.05, 2.0), 1 + rng.below(2) as u8)?;
        let idx = IndexMatrix::exhaustive(width, MomentOrder(1))?;
        Ok(((routes.khomm)(&s, &t, &idx, kernel)?, (routes.kernel_mmd)(&s, &t, kernel)?))
    })
}

/// Sampled-estimator statistics at one sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloPoint {
    pub n_samples: usize,
    pub mean: f64,
    /// Standard error of the mean over seeds.
    pub standard_error: f64,
    /// Root mean squared deviation from the exact value over seeds.
    pub rms_error: f64,
}

/// Sampled third-order HoMM on one fixed pair of batches (b = 32, L = 16),
/// averaged over `seeds` index draws at each sample count.
pub fn monte_carlo_study(
    routes: &CheckRoutes,
    seed: u64,
    sample_counts: &[usize],
    seeds: u64,
) -> Result<(f64, Vec<MonteCarloPoint>)> {
    let mut rng = SplitMix64::new(seed);
    let s = uniform_batch(&mut rng, 32, 16);
    let t = uniform_batch(&mut rng, 32, 16);
    let p = MomentOrder(3);
    let exact = (routes.homm_full)(&s, &t, p)?;
    let mut points = Vec::with_capacity(sample_counts.len());
    for &n in sample_counts {
        let values = (0..seeds)
            .map(|k| {
                let idx = sample_indices(16, p, n, derive_seed(seed, n as u64, k))?;
                (routes.homm_sampled)(&s, &t, &idx)
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let mse = values.iter().map(|v| (v - exact).powi(2)).sum::<f64>() / m;
        points.push(MonteCarloPoint {
            n_samples: n,
            mean,
            standard_error: (var / m).sqrt(),
            rms_error: mse.sqrt(),
        });
    }
    Ok((exact, points))
}

pub fn monte_carlo(routes: &CheckRoutes, seed: u64) -> PropertyResult {
    let name = "Monte-Carlo consistency";
    let (exact, points) = match monte_carlo_study(routes, seed, &[100, 1_000, 10_000], 20) {
        Ok(r) => r,
        Err(e) => {
            return PropertyResult {
                name,
                passed: false,
                measured: f64::NAN,
                tolerance: 3.0,
                detail: format!("error: {e}"),
            }
        }
    };
    let decreasing = points.windows(2).all(|w| w[1].rms_error < w[0].rms_error);
    let last = points.last().expect("three sample counts");
    let z = (last.mean - exact).abs() / last.standard_error;
    let errors: Vec<String> = points.iter().map(|p| format!("N={}: {:.2e}", p.n_samples, p.rms_error)).collect();
    PropertyResult {
        name,
        passed: decreasing && z <= 3.0,
        measured: z,
        tolerance: 3.0,
        detail: format!(
            "(standard errors from exact at N=1e4; rms error {}{})",
            errors.join(", "),
            if decreasing { "" } else { ", not decreasing" }
        ),
    }
}

/// Finite-difference check of every objective term, in isolation and
/// combined, on a tiny network (d = 4, L = 8, c = 3, b = 4).
pub fn gradient_suite(seed: u64) -> Vec<PropertyResult> {
    const TOLERANCE: f64 = 1e-4;
    let sizes = [4, 6, 8, 3];
    let net = MlpNetwork::new(&sizes, seed).expect("valid sizes");
    let mut rng = SplitMix64::new(derive_seed(seed, 1, 0));
    let xs = Array2::from_shape_fn((4, 4), |_| rng.uniform(-1.0, 1.0));
    let xt = Array2::from_shape_fn((4, 4), |_| rng.uniform(-1.0, 1.0) + 0.3);
    let ys = vec![0, 1, 2, 1];
    let batch = StepBatch { source_inputs: xs.view(), source_labels: &ys, target_inputs: xt.view() };
    let idx = sample_indices(8, MomentOrder(3), 60, derive_seed(seed, 2, 0)).expect("valid order");
    let centers = ClassCenters::new(Array2::from_shape_fn((3, 8), |_| rng.uniform(-0.5, 0.5)), 0.5)
        .expect("valid alpha");
    let assignment = PseudoLabelAssignment::new(vec![
        PseudoLabel { row: 0, label: 2, confidence: 0.9 },
        PseudoLabel { row: 3, label: 0, confidence: 0.95 },
    ]);
    let kernel = KernelConfig::gaussian(0.5).expect("positive gamma");
    let none = LossConfig { source_weight: 0.0, ..LossConfig::source_only() };
    let with_d = |d| LossConfig { discrepancy: Some(d), discrepancy_weight: 100.0, ..none };
    let cluster = ClusteringTerm { weight: 1.0, centers: &centers, assignment: &assignment };

    let cases: Vec<(&'static str, LossConfig<'_>)> = vec![
        ("gradient L_s", LossConfig::source_only()),
        ("gradient L_d full p=3", with_d(Discrepancy::Full { order: MomentOrder(3) })),
        ("gradient L_d group", with_d(Discrepancy::Group { order: MomentOrder(3), n_groups: 2 })),
        ("gradient L_d sampled", with_d(Discrepancy::Sampled { indices: &idx })),
        ("gradient L_d kernelized", with_d(Discrepancy::Kernelized { indices: &idx, kernel })),
        ("gradient L_d linear MMD", with_d(Discrepancy::LinearMmd)),
        ("gradient L_d Gram", with_d(Discrepancy::Gram)),
        ("gradient L_d CORAL", with_d(Discrepancy::Coral)),
        ("gradient L_dc", LossConfig { clustering: Some(cluster), ..none }),
        ("gradient L_ent", LossConfig { entropy_weight: 1.0, ..none }),
        (
            "gradient composite",
            LossConfig {
                source_weight: 1.0,
                discrepancy: Some(Discrepancy::Full { order: MomentOrder(3) }),
                discrepancy_weight: 30.0,
                clustering: Some(ClusteringTerm { weight: 0.3, ..cluster }),
                entropy_weight: 0.1,
            },
        ),
    ];
    cases
        .into_iter()
        .map(|(name, config)| {
            let report = backward(&net, &batch, &config).map(|(_, grads)| {
                finite_diff_check(
                    &net,
                    |n| objective(n, &batch, &config).map_or(f64::NAN, |l| l.total),
                    &grads,
                    1e-5,
                    TOLERANCE,
                )
            });
            match report {
                Ok(r) => PropertyResult {
                    name,
                    passed: r.passed(),
                    measured: r.max_relative_error(),
                    tolerance: TOLERANCE,
                    detail: format!("(worst relative error over {} parameters)", r.checks.len()),
                },
                Err(e) => PropertyResult {
                    name,
                    passed: false,
                    measured: f64::NAN,
                    tolerance: TOLERANCE,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect()
}

/// Every property, in a fixed order.
pub fn run_checks(routes: &CheckRoutes, seed: u64) -> Vec<PropertyResult> {
    let mut results = vec![
        equivalence_a(routes, derive_seed(seed, 10, 0)),
        equivalence_b(routes, derive_seed(seed, 11, 0)),
        equivalence_c(routes, derive_seed(seed, 12, 0)),
        equivalence_d(routes, derive_seed(seed, 13, 0)),
        monte_carlo(routes, derive_seed(seed, 14, 0)),
    ];
    results.extend(gradient_suite(derive_seed(seed, 15, 0)));
    results
}
