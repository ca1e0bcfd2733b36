//! The composite training objective
//! `L_s + λ_d L_d + λ_dc L_dc + w_ent L_ent`
//! evaluated with one shared parameter set on a source and a target batch.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use super::mlp::{cross_entropy, cross_entropy_logit_grad, Gradients, MlpNetwork};
use crate::discrepancy::{
    clustering_loss, clustering_loss_with_grad, entropy_logit_grad, entropy_loss, ClassCenters,
    Discrepancy, PseudoLabelAssignment,
};
use crate::error::{HommError, Result};

/// Pseudo-label clustering term. Centres and assignment are constants of the
/// step; no gradient flows into them.
#[derive(Debug, Clone, Copy)]
pub struct ClusteringTerm<'a> {
    pub weight: f64,
    pub centers: &'a ClassCenters,
    pub assignment: &'a PseudoLabelAssignment,
}

/// Which terms are active and how they are weighted.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig<'a> {
    pub source_weight: f64,
    pub discrepancy: Option<Discrepancy<'a>>,
    pub discrepancy_weight: f64,
    pub clustering: Option<ClusteringTerm<'a>>,
    pub entropy_weight: f64,
}

impl<'a> LossConfig<'a> {
    /// Plain supervised training on the source batch.
    pub fn source_only() -> Self {
        Self {
            source_weight: 1.0,
            discrepancy: None,
            discrepancy_weight: 0.0,
            clustering: None,
            entropy_weight: 0.0,
        }
    }
}

/// One step's inputs: labelled source rows and unlabelled target rows.
#[derive(Debug, Clone, Copy)]
pub struct StepBatch<'a> {
    pub source_inputs: ArrayView2<'a, f64>,
    pub source_labels: &'a [usize],
    pub target_inputs: ArrayView2<'a, f64>,
}

/// Unweighted term values and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub source: f64,
    pub discrepancy: f64,
    pub clustering: f64,
    pub entropy: f64,
    pub total: f64,
}

fn finite(value: f64, term: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(HommError::NonFinite(format!("loss term {term}")))
    }
}

impl LossBreakdown {
    fn finish(mut self, config: &LossConfig<'_>) -> Result<Self> {
        let weighted = [
            (config.source_weight * self.source, "L_s"),
            (config.discrepancy_weight * self.discrepancy, "lambda_d * L_d"),
            (config.clustering.map_or(0.0, |c| c.weight) * self.clustering, "lambda_dc * L_dc"),
            (config.entropy_weight * self.entropy, "entropy_weight * L_ent"),
        ];
        self.total = 0.0;
        for (value, term) in weighted {
            self.total += finite(value, term)?;
        }
        finite(self.total, "total")?;
        Ok(self)
    }
}

/// Objective value only, computed through the value-route loss functions.
pub fn objective(net: &MlpNetwork, batch: &StepBatch<'_>, config: &LossConfig<'_>) -> Result<LossBreakdown> {
    let src = net.trace(batch.source_inputs)?;
    let tgt = net.trace(batch.target_inputs)?;
    let mut out = LossBreakdown {
        source: finite(cross_entropy(src.probs(), batch.source_labels)?, "L_s")?,
        ..Default::default()
    };
    if let Some(d) = &config.discrepancy {
        out.discrepancy = finite(d.value(&src.adapted_batch()?, &tgt.adapted_batch()?)?, "L_d")?;
    }
    if let Some(c) = &config.clustering {
        out.clustering = finite(
            clustering_loss(&tgt.adapted_batch()?, c.assignment, c.centers)?,
            "L_dc",
        )?;
    }
    if config.entropy_weight != 0.0 {
        out.entropy = finite(entropy_loss(tgt.probs())?, "L_ent")?;
    }
    out.finish(config)
}

/// Objective value and exact parameter gradients by reverse mode.
pub fn backward(
    net: &MlpNetwork,
    batch: &StepBatch<'_>,
    config: &LossConfig<'_>,
) -> Result<(LossBreakdown, Gradients)> {
    let src = net.trace(batch.source_inputs)?;
    let tgt = net.trace(batch.target_inputs)?;
    let mut out = LossBreakdown {
        source: finite(cross_entropy(src.probs(), batch.source_labels)?, "L_s")?,
        ..Default::default()
    };

    let mut d_logits_s = cross_entropy_logit_grad(src.probs(), batch.source_labels)?;
    d_logits_s *= config.source_weight;
    let mut d_logits_t = Array2::zeros(tgt.probs().dim());
    let mut d_adapted_s = Array2::zeros(src.adapted().dim());
    let mut d_adapted_t = Array2::zeros(tgt.adapted().dim());

    if let Some(d) = &config.discrepancy {
        let lg = d.value_and_grad(&src.adapted_batch()?, &tgt.adapted_batch()?)?;
        out.discrepancy = finite(lg.value, "L_d")?;
        if config.discrepancy_weight != 0.0 {
            d_adapted_s.scaled_add(config.discrepancy_weight, &lg.source);
            d_adapted_t.scaled_add(config.discrepancy_weight, &lg.target);
        }
    }
    if let Some(c) = &config.clustering {
        let (value, grad) = clustering_loss_with_grad(&tgt.adapted_batch()?, c.assignment, c.centers)?;
        out.clustering = finite(value, "L_dc")?;
        if c.weight != 0.0 {
            d_adapted_t.scaled_add(c.weight, &grad);
        }
    }
    if config.entropy_weight != 0.0 {
        out.entropy = finite(entropy_loss(tgt.probs())?, "L_ent")?;
        d_logits_t.scaled_add(config.entropy_weight, &entropy_logit_grad(tgt.probs()));
    }
    let out = out.finish(config)?;

    let mut grads = net.backward(&src, d_logits_s.view(), Some(d_adapted_s.view()))?;
    grads.add_assign(&net.backward(&tgt, d_logits_t.view(), Some(d_adapted_t.view()))?);
    if !grads.is_finite() {
        return Err(HommError::NonFinite("parameter gradients".into()));
    }
    Ok((out, grads))
}
