use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::step::{train_step, TrainState, SOURCE_ORDER_STREAM, TARGET_ORDER_STREAM};
use crate::data::LabeledDataset;
use crate::discrepancy::ClassCenters;
use crate::error::{HommError, Result};
use crate::network::MlpNetwork;
use crate::rng::{derive_seed, SplitMix64};

/// Classification accuracy of a network on a labelled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `None` for classes with no samples in the dataset.
    pub per_class: Vec<Option<f64>>,
    pub samples: usize,
}

pub fn evaluate(net: &MlpNetwork, dataset: &LabeledDataset) -> Result<Evaluation> {
    let labels = dataset
        .labels()
        .ok_or_else(|| HommError::contract("evaluation needs a labelled dataset"))?;
    let predictions = net.predict(dataset.features())?;
    let n_classes = net.n_classes().max(dataset.n_classes().unwrap_or(0));
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&y, &pred) in labels.iter().zip(&predictions) {
        totals[y] += 1;
        hits[y] += usize::from(y == pred);
    }
    let correct: usize = hits.iter().sum();
    Ok(Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        per_class: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
        samples: labels.len(),
    })
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub step: usize,
    pub l_s: f64,
    pub l_d: f64,
    pub l_dc: f64,
    pub l_ent: f64,
    pub total: f64,
    pub pseudo_labels: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: Vec<TrainMetrics>,
    pub network: MlpNetwork,
    pub centers: ClassCenters,
    pub source: Evaluation,
    pub target: Evaluation,
}

/// Endless stream of fixed-size mini-batches over `n` rows: each epoch is a
/// fresh permutation, and a batch that runs past the end of an epoch
/// continues into the next one.
#[derive(Debug, Clone)]
pub struct BatchCycler {
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
    seed: u64,
}

impl BatchCycler {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut cycler = Self { order: (0..n).collect(), cursor: 0, epoch: 0, seed };
        cycler.reshuffle();
        cycler
    }

    fn reshuffle(&mut self) {
        self.order.sort_unstable();
        SplitMix64::new(derive_seed(self.seed, 0, self.epoch)).shuffle(&mut self.order);
        self.epoch += 1;
        self.cursor = 0;
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            let take = (size - batch.len()).min(self.order.len() - self.cursor);
            batch.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        batch
    }
}

fn gather(x: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    LabeledDataset::gather(x, idx)
}

/// Trains on the labelled `source` and the unlabelled rows of `target`,
/// keeping all records in memory.
pub fn run_experiment(
    config: &TrainConfig,
    source: &LabeledDataset,
    target: &LabeledDataset,
) -> Result<ExperimentOutcome> {
    run_experiment_with(config, source, target, |_| Ok(()))
}

/// As [`run_experiment`], handing each record to `sink` as it is produced.
///
/// Target labels are read only by the evaluations; training sees the target
/// through its unlabelled view.
pub fn run_experiment_with(
    config: &TrainConfig,
    source: &LabeledDataset,
    target: &LabeledDataset,
    mut sink: impl FnMut(&TrainMetrics) -> Result<()>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let source_labels = source
        .labels()
        .ok_or_else(|| HommError::contract("source dataset must be labelled"))?;
    if source.dim() != target.dim() {
        return Err(HommError::DimensionMismatch {
            context: "target input width",
            expected: source.dim(),
            actual: target.dim(),
        });
    }
    let n_classes = source.n_classes().unwrap_or(0).max(target.n_classes().unwrap_or(0));
    if n_classes < 2 {
        return Err(HommError::contract("need at least two classes"));
    }
    let unlabeled = target.unlabeled();
    if config.batch_size > source.len() || config.batch_size > unlabeled.len() {
        return Err(HommError::config("batch_size", "larger than a dataset"));
    }

    let mut state = TrainState::init(config, source.dim(), n_classes)?;
    let mut source_batches = BatchCycler::new(source.len(), derive_seed(config.seed, SOURCE_ORDER_STREAM, 0));
    let mut target_batches = BatchCycler::new(unlabeled.len(), derive_seed(config.seed, TARGET_ORDER_STREAM, 0));
    let mut metrics = Vec::new();

    for step in 0..config.total_steps {
        let s_idx = source_batches.next_batch(config.batch_size);
        let t_idx = target_batches.next_batch(config.batch_size);
        let xs = gather(source.features(), &s_idx);
        let ys: Vec<usize> = s_idx.iter().map(|&i| source_labels[i]).collect();
        let xt = gather(unlabeled.features(), &t_idx);
        let outcome = train_step(&mut state, xs.view(), &ys, xt.view(), config, step)?;

        let last = step + 1 == config.total_steps;
        if step % config.log_every != 0 && !last {
            continue;
        }
        let eval_now = last || (config.eval_every > 0 && step % config.eval_every == 0);
        let (source_accuracy, target_accuracy) = if eval_now {
            (
                Some(evaluate(&state.net, source)?.accuracy),
                Some(evaluate(&state.net, target)?.accuracy),
            )
        } else {
            (None, None)
        };
        let l = outcome.losses;
        let record = TrainMetrics {
            step,
            l_s: l.source,
            l_d: l.discrepancy,
            l_dc: l.clustering,
            l_ent: l.entropy,
            total: l.total,
            pseudo_labels: outcome.pseudo_labels,
            source_accuracy,
            target_accuracy,
        };
        sink(&record)?;
        metrics.push(record);
    }

    Ok(ExperimentOutcome {
        metrics,
        source: evaluate(&state.net, source)?,
        target: evaluate(&state.net, target)?,
        network: state.net,
        centers: state.centers,
    })
}
