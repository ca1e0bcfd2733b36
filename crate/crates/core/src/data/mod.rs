//! Labelled datasets, synthetic shifted domain pairs and CSV feature files.

mod csv_io;
mod synthetic;

pub use csv_io::{load_features_csv, write_features_csv};
pub use synthetic::{
    component_means, gen_gaussian_mixture_pair, gen_two_moons_pair, two_moons, ShiftSpec,
};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{HommError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// Feature rows with optional class labels.
///
/// Target datasets usually carry labels for evaluation only; the training
/// loop sees them through [`LabeledDataset::unlabeled`], which has no access
/// to labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    domain: Domain,
}

/// Label-free view of a dataset, the only form the trainer reads targets in.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledView<'a> {
    features: ArrayView2<'a, f64>,
}

impl<'a> UnlabeledView<'a> {
    pub fn features(&self) -> ArrayView2<'a, f64> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Option<Vec<usize>>, domain: Domain) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(HommError::contract("dataset must have at least one row and column"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(HommError::NonFinite("dataset features".into()));
        }
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(HommError::DimensionMismatch {
                    context: "label count",
                    expected: features.nrows(),
                    actual: l.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            domain,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// `1 + max label`, or `None` for an unlabelled dataset.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().and_then(|l| l.iter().max()).map(|m| m + 1)
    }

    pub fn unlabeled(&self) -> UnlabeledView<'_> {
        UnlabeledView {
            features: self.features.view(),
        }
    }

    /// Rows `idx` of the features, in order.
    pub(crate) fn gather(features: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((idx.len(), features.ncols()), |(i, j)| features[[idx[i], j]])
    }
}
