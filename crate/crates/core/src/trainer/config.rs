use serde::{Deserialize, Serialize};

use crate::discrepancy::{Discrepancy, KernelConfig};
use crate::error::{HommError, Result};
use crate::moments::{IndexMatrix, MomentOrder, DEFAULT_MEMORY_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    Full,
    Group,
    Sampled,
    Kernelized,
    Mmd,
    Gram,
    Coral,
}

impl LossVariant {
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Full => "full",
            LossVariant::Group => "group",
            LossVariant::Sampled => "sampled",
            LossVariant::Kernelized => "kernelized",
            LossVariant::Mmd => "mmd",
            LossVariant::Gram => "gram",
            LossVariant::Coral => "coral",
        }
    }

    /// Whether each step draws a fresh index matrix.
    pub fn uses_indices(self) -> bool {
        matches!(self, LossVariant::Sampled | LossVariant::Kernelized)
    }
}

/// Every knob of a training run.
///
/// Field names are the keys of the flat configuration file; `N` is the
/// number of sampled tensor coordinates and `n_g` the number of groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_d: f64,
    pub lambda_dc: f64,
    pub eta: f64,
    /// Steps before the clustering term and centre updates switch on.
    pub warmup_steps: usize,
    pub loss_variant: LossVariant,
    pub p: u32,
    pub n_g: usize,
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub gamma: f64,
    pub kernel_exponent: u8,
    pub entropy_weight: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    /// Centre moving-average rate.
    pub alpha: f64,
    pub seed: u64,
    pub learning_rate: f64,
    /// Widths of the hidden layers below the adapted layer.
    pub hidden: Vec<usize>,
    pub adapted_width: usize,
    /// A metrics record is written every `log_every` steps and after the last.
    pub log_every: usize,
    /// Accuracies are attached every `eval_every` steps and after the last;
    /// 0 means only after the last.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_d: 1e4,
            lambda_dc: 0.1,
            eta: 0.8,
            warmup_steps: 500,
            loss_variant: LossVariant::Full,
            p: 3,
            n_g: 4,
            n_samples: 1000,
            gamma: 1e-4,
            kernel_exponent: 2,
            entropy_weight: 0.0,
            batch_size: 64,
            total_steps: 2000,
            alpha: 0.5,
            seed: 0,
            learning_rate: 1e-3,
            hidden: vec![32, 32],
            adapted_width: 16,
            log_every: 10,
            eval_every: 100,
        }
    }
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(HommError::config(field, message))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        check(nonneg(self.lambda_d), "lambda_d", "must be a finite value >= 0")?;
        check(nonneg(self.lambda_dc), "lambda_dc", "must be a finite value >= 0")?;
        check(self.eta > 0.0 && self.eta < 1.0, "eta", "must lie strictly between 0 and 1")?;
        check(self.warmup_steps <= self.total_steps, "warmup_steps", "must not exceed total_steps")?;
        check(self.p >= 1, "p", "must be at least 1")?;
        check(
            self.n_g >= 1 && self.n_g <= self.adapted_width,
            "n_g",
            "must lie between 1 and adapted_width",
        )?;
        check(self.n_samples >= 1, "N", "must be at least 1")?;
        self.kernel()?;
        check(nonneg(self.entropy_weight), "entropy_weight", "must be a finite value >= 0")?;
        check(self.batch_size >= 2, "batch_size", "must be at least 2")?;
        check((0.0..=1.0).contains(&self.alpha), "alpha", "must lie in [0, 1]")?;
        check(
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            "learning_rate",
            "must be > 0",
        )?;
        check(self.hidden.iter().all(|&w| w > 0), "hidden", "layer widths must be positive")?;
        check(self.adapted_width >= 1, "adapted_width", "must be at least 1")?;
        check(self.log_every >= 1, "log_every", "must be at least 1")?;
        if matches!(self.loss_variant, LossVariant::Full | LossVariant::Group) {
            let width = match self.loss_variant {
                LossVariant::Group => self.adapted_width / self.n_g,
                _ => self.adapted_width,
            };
            MomentOrder(self.p)
                .tensor_len(width, DEFAULT_MEMORY_CAP)
                .map_err(|e| HommError::config("p", e.to_string()))?;
        }
        Ok(())
    }

    pub fn order(&self) -> MomentOrder {
        MomentOrder(self.p)
    }

    pub fn kernel(&self) -> Result<KernelConfig> {
        KernelConfig::new(self.gamma, self.kernel_exponent)
    }

    /// The configured discrepancy. `indices` must be supplied for the
    /// sampled and kernelized variants.
    pub fn discrepancy<'a>(&self, indices: Option<&'a IndexMatrix>) -> Result<Discrepancy<'a>> {
        let need = || HommError::contract(format!("{} variant needs an index matrix", self.loss_variant.name()));
        Ok(match self.loss_variant {
            LossVariant::Full => Discrepancy::Full { order: self.order() },
            LossVariant::Group => Discrepancy::Group { order: self.order(), n_groups: self.n_g },
            LossVariant::Sampled => Discrepancy::Sampled { indices: indices.ok_or_else(need)? },
            LossVariant::Kernelized => Discrepancy::Kernelized {
                indices: indices.ok_or_else(need)?,
                kernel: self.kernel()?,
            },
            LossVariant::Mmd => Discrepancy::LinearMmd,
            LossVariant::Gram => Discrepancy::Gram,
            LossVariant::Coral => Discrepancy::Coral,
        })
    }

    /// Layer sizes of the classifier for `input_dim` inputs and `n_classes`
    /// outputs.
    pub fn layer_sizes(&self, input_dim: usize, n_classes: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 3);
        sizes.push(input_dim);
        sizes.extend(&self.hidden);
        sizes.push(self.adapted_width);
        sizes.push(n_classes);
        sizes
    }
}
