//! Domain discrepancy losses and the target-side clustering terms.
//!
//! Every distribution-level loss comes in two forms: a plain value function
//! and a `*_with_grad` variant that also returns the gradient with respect to
//! both feature batches. The two routes are implemented separately so that
//! one can serve as a check on the other.

mod classic;
mod clustering;
mod homm;
mod kernel;

pub use classic::{gram_loss, gram_loss_with_grad, linear_mmd, linear_mmd_with_grad};
pub use clustering::{
    clustering_loss, clustering_loss_with_grad, entropy_logit_grad, entropy_loss,
    update_centers, update_centers_with, AbsentClassPolicy, ClassCenters, PseudoLabel,
    PseudoLabelAssignment,
};
pub use homm::{
    homm_full, homm_full_with_grad, homm_group, homm_group_with, homm_group_with_grad,
    homm_sampled, homm_sampled_with_grad,
};
pub use kernel::{khomm, khomm_with_grad, kernel_mmd, KernelConfig};

use ndarray::Array2;

use crate::error::{HommError, Result};
use crate::moments::{partition_groups, FeatureBatch, IndexMatrix, MomentOrder};

/// A loss value together with its gradient with respect to each batch.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub source: Array2<f64>,
    pub target: Array2<f64>,
}

impl LossGrad {
    fn zero_for(source: &FeatureBatch, target: &FeatureBatch) -> Self {
        Self {
            value: 0.0,
            source: Array2::zeros(source.view().dim()),
            target: Array2::zeros(target.view().dim()),
        }
    }
}

/// One concrete choice of discrepancy, ready to evaluate on a pair of batches.
#[derive(Debug, Clone, Copy)]
pub enum Discrepancy<'a> {
    Full { order: MomentOrder },
    Group { order: MomentOrder, n_groups: usize },
    Sampled { indices: &'a IndexMatrix },
    Kernelized { indices: &'a IndexMatrix, kernel: KernelConfig },
    LinearMmd,
    Gram,
    Coral,
}

impl Discrepancy<'_> {
    pub fn value(&self, source: &FeatureBatch, target: &FeatureBatch) -> Result<f64> {
        match *self {
            Discrepancy::Full { order } => homm_full(source, target, order),
            Discrepancy::Group { order, n_groups } => homm_group(source, target, order, n_groups),
            Discrepancy::Sampled { indices } => homm_sampled(source, target, indices),
            Discrepancy::Kernelized { indices, kernel } => khomm(source, target, indices, kernel),
            Discrepancy::LinearMmd => linear_mmd(source, target),
            Discrepancy::Gram => gram_loss(source, target, false),
            Discrepancy::Coral => gram_loss(source, target, true),
        }
    }

    pub fn value_and_grad(&self, source: &FeatureBatch, target: &FeatureBatch) -> Result<LossGrad> {
        match *self {
            Discrepancy::Full { order } => homm_full_with_grad(source, target, order),
            Discrepancy::Group { order, n_groups } => {
                let partition = partition_groups(source.width(), n_groups)?;
                homm_group_with_grad(source, target, order, &partition)
            }
            Discrepancy::Sampled { indices } => homm_sampled_with_grad(source, target, indices),
            Discrepancy::Kernelized { indices, kernel } => {
                khomm_with_grad(source, target, indices, kernel)
            }
            Discrepancy::LinearMmd => linear_mmd_with_grad(source, target),
            Discrepancy::Gram => gram_loss_with_grad(source, target, false),
            Discrepancy::Coral => gram_loss_with_grad(source, target, true),
        }
    }
}

pub(crate) fn check_same_width(source: &FeatureBatch, target: &FeatureBatch) -> Result<()> {
    if source.width() != target.width() {
        return Err(HommError::DimensionMismatch {
            context: "adapted-layer width",
            expected: source.width(),
            actual: target.width(),
        });
    }
    Ok(())
}

pub(crate) fn check_same_shape(source: &FeatureBatch, target: &FeatureBatch) -> Result<()> {
    check_same_width(source, target)?;
    if source.rows() != target.rows() {
        return Err(HommError::DimensionMismatch {
            context: "batch size (source and target must match)",
            expected: source.rows(),
            actual: target.rows(),
        });
    }
    Ok(())
}
