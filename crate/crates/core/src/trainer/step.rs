use ndarray::ArrayView2;

use super::config::TrainConfig;
use crate::discrepancy::{update_centers, ClassCenters, PseudoLabel, PseudoLabelAssignment};
use crate::error::{HommError, Result};
use crate::moments::{sample_indices, IndexMatrix};
use crate::network::{argmax, backward, Adam, ClusteringTerm, LossBreakdown, LossConfig, MlpNetwork, StepBatch};
use crate::rng::derive_seed;

pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const INDEX_STREAM: u64 = 2;
pub(crate) const SOURCE_ORDER_STREAM: u64 = 3;
pub(crate) const TARGET_ORDER_STREAM: u64 = 4;

/// Rows whose top probability exceeds `eta`, labelled with their argmax
/// (lowest class index on ties).
pub fn pseudo_label(probs: ArrayView2<'_, f64>, eta: f64) -> PseudoLabelAssignment {
    let entries = probs
        .rows()
        .into_iter()
        .enumerate()
        .filter_map(|(row, p)| {
            let (label, confidence) = argmax(p.iter().copied());
            (confidence > eta).then_some(PseudoLabel { row, label, confidence })
        })
        .collect();
    PseudoLabelAssignment::new(entries)
}

/// Everything a run mutates from step to step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub net: MlpNetwork,
    pub optimizer: Adam,
    pub centers: ClassCenters,
}

impl TrainState {
    /// Freshly initialised network, optimizer and zero centres, all derived
    /// from the run seed.
    pub fn init(config: &TrainConfig, input_dim: usize, n_classes: usize) -> Result<Self> {
        let sizes = config.layer_sizes(input_dim, n_classes);
        let net = MlpNetwork::new(&sizes, derive_seed(config.seed, INIT_STREAM, 0))?;
        let optimizer = Adam::for_network(config.learning_rate, &net);
        let centers = ClassCenters::zeros(n_classes, config.adapted_width, config.alpha)?;
        Ok(Self { net, optimizer, centers })
    }
}

/// What one step measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub losses: LossBreakdown,
    pub pseudo_labels: usize,
}

/// Index matrix used at `step` by the sampled and kernelized variants.
pub fn step_indices(config: &TrainConfig, step: usize) -> Result<Option<IndexMatrix>> {
    if !config.loss_variant.uses_indices() {
        return Ok(None);
    }
    let seed = derive_seed(config.seed, INDEX_STREAM, step as u64);
    sample_indices(config.adapted_width, config.order(), config.n_samples, seed).map(Some)
}

/// One optimizer step on the full objective.
///
/// Before `warmup_steps` the clustering term is absent and the centres are
/// left alone. From then on the target batch is pseudo-labelled with the
/// current network, the clustering term is measured against the current
/// centres, and after the parameter update the centres move toward the
/// pseudo-labelled features of this batch.
pub fn train_step(
    state: &mut TrainState,
    source_inputs: ArrayView2<'_, f64>,
    source_labels: &[usize],
    target_inputs: ArrayView2<'_, f64>,
    config: &TrainConfig,
    step: usize,
) -> Result<StepOutcome> {
    if step >= config.total_steps {
        return Err(HommError::contract(format!(
            "step {step} is past total_steps = {}",
            config.total_steps
        )));
    }
    let indices = step_indices(config, step)?;
    let discrepancy = config.discrepancy(indices.as_ref())?;
    let batch = StepBatch { source_inputs, source_labels, target_inputs };

    let clustering = if step >= config.warmup_steps {
        let fwd = state.net.forward(target_inputs)?;
        Some((pseudo_label(fwd.probs.view(), config.eta), fwd.adapted))
    } else {
        None
    };
    let loss = LossConfig {
        source_weight: 1.0,
        discrepancy: Some(discrepancy),
        discrepancy_weight: config.lambda_d,
        clustering: clustering.as_ref().map(|(assignment, _)| ClusteringTerm {
            weight: config.lambda_dc,
            centers: &state.centers,
            assignment,
        }),
        entropy_weight: config.entropy_weight,
    };
    let (losses, grads) = backward(&state.net, &batch, &loss)?;
    state.optimizer.step(&mut state.net, &grads)?;

    let pseudo_labels = match clustering {
        Some((assignment, features)) => {
            state.centers = update_centers(&state.centers, &features, &assignment)?;
            assignment.len()
        }
        None => 0,
    };
    Ok(StepOutcome { losses, pseudo_labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pseudo_label_examples() {
        let a = pseudo_label(array![[0.9, 0.1]].view(), 0.8);
        assert_eq!(a.len(), 1);
        let e = a.iter().next().unwrap();
        assert_eq!((e.row, e.label, e.confidence), (0, 0, 0.9));
        assert!(pseudo_label(array![[0.6, 0.4]].view(), 0.8).is_empty());
        assert_eq!(pseudo_label(array![[0.5, 0.5]].view(), 0.4).labels(), vec![0]);
        // strictly greater than the threshold
        assert!(pseudo_label(array![[0.8, 0.2]].view(), 0.8).is_empty());
    }

    #[test]
    fn pseudo_label_count_is_monotone_in_eta() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let probs = ndarray::Array2::from_shape_fn((50, 4), |_| rng.next_f64() + 1e-3);
        let probs = &probs / &probs.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
        let mut last = usize::MAX;
        for k in 1..20 {
            let eta = k as f64 / 20.0;
            let a = pseudo_label(probs.view(), eta);
            assert!(a.iter().all(|e| e.confidence > eta));
            assert!(a.len() <= last);
            last = a.len();
        }
    }

    #[test]
    fn step_past_budget_is_rejected() {
        let config = TrainConfig { total_steps: 1, warmup_steps: 0, ..Default::default() };
        let mut state = TrainState::init(&config, 2, 2).unwrap();
        let x = array![[0.1, 0.2], [0.3, -0.1]];
        assert!(train_step(&mut state, x.view(), &[0, 1], x.view(), &config, 1).is_err());
        train_step(&mut state, x.view(), &[0, 1], x.view(), &config, 0).unwrap();
    }
}
