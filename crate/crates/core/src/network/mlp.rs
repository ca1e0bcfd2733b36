use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{HommError, Result};
use crate::moments::FeatureBatch;
use crate::rng::SplitMix64;

/// One fully connected layer, `out = in · weights + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Feed-forward classifier: tanh on every hidden layer (the last of which is
/// the adapted layer), softmax on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub adapted: FeatureBatch,
    pub probs: Array2<f64>,
}

/// Cached activations of a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input, `activations[k]` the output of hidden
    /// layer `k`; the last entry is the adapted layer.
    activations: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

impl Trace {
    pub fn adapted(&self) -> ArrayView2<'_, f64> {
        self.activations.last().expect("trace has input").view()
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    pub fn adapted_batch(&self) -> Result<FeatureBatch> {
        FeatureBatch::new(self.adapted().to_owned())
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    /// Flattened in the same order as [`MlpNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

impl MlpNetwork {
    /// Random initialisation: weights uniform in `±sqrt(3 / fan_in)`, zero biases.
    ///
    /// `layer_sizes` is `[input, hidden.., adapted, classes]` and needs at
    /// least three entries so that an adapted layer exists.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        Self::build(layer_sizes, |fan_in, _| {
            let bound = (3.0 / fan_in as f64).sqrt();
            rng.uniform(-bound, bound)
        })
    }

    /// All weights and biases zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        Self::build(layer_sizes, |_, _| 0.0)
    }

    fn build(layer_sizes: &[usize], mut init: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(HommError::contract(
                "layer sizes need input, adapted and output widths",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(HommError::contract("layer sizes must be positive"));
        }
        if *layer_sizes.last().unwrap() < 2 {
            return Err(HommError::contract("a classifier needs at least two classes"));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense {
                weights: Array2::from_shape_fn((w[0], w[1]), |_| init(w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub(crate) fn from_parts(layer_sizes: Vec<usize>, layers: Vec<Dense>) -> Result<Self> {
        let mut net = Self::zeros(&layer_sizes)?;
        if layers.len() != net.layers.len() {
            return Err(HommError::contract("layer count does not match layer sizes"));
        }
        for (slot, layer) in net.layers.iter_mut().zip(layers) {
            if slot.weights.dim() != layer.weights.dim() || slot.bias.len() != layer.bias.len() {
                return Err(HommError::contract("layer shape does not match layer sizes"));
            }
            *slot = layer;
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn adapted_width(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(HommError::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Forward> {
        let trace = self.trace(inputs)?;
        Ok(Forward {
            adapted: trace.adapted_batch()?,
            probs: trace.probs,
        })
    }

    /// Forward pass keeping every activation for [`MlpNetwork::backward`].
    pub fn trace(&self, inputs: ArrayView2<'_, f64>) -> Result<Trace> {
        if inputs.ncols() != self.input_dim() {
            return Err(HommError::DimensionMismatch {
                context: "network input width",
                expected: self.input_dim(),
                actual: inputs.ncols(),
            });
        }
        let n_hidden = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(n_hidden + 1);
        activations.push(inputs.to_owned());
        for (k, layer) in self.layers[..n_hidden].iter().enumerate() {
            let z = activations[k].dot(&layer.weights) + &layer.bias;
            let a = z.mapv(f64::tanh);
            check_finite(&a, k + 1)?;
            activations.push(a);
        }
        let out = &self.layers[n_hidden];
        let logits = activations[n_hidden].dot(&out.weights) + &out.bias;
        check_finite(&logits, n_hidden + 1)?;
        Ok(Trace {
            activations,
            probs: softmax_rows(logits),
        })
    }

    /// Reverse pass: parameter gradients given the loss gradient with respect
    /// to the logits and, optionally, an extra gradient arriving directly at
    /// the adapted-layer activations.
    pub fn backward(
        &self,
        trace: &Trace,
        d_logits: ArrayView2<'_, f64>,
        d_adapted: Option<ArrayView2<'_, f64>>,
    ) -> Result<Gradients> {
        let n_hidden = self.layers.len() - 1;
        let mut grads = Gradients::zeros_like(self);

        let out = &self.layers[n_hidden];
        let adapted = &trace.activations[n_hidden];
        grads.layers[n_hidden].weights = adapted.t().dot(&d_logits);
        grads.layers[n_hidden].bias = d_logits.sum_axis(Axis(0));
        let mut d_act = d_logits.dot(&out.weights.t());
        if let Some(extra) = d_adapted {
            d_act += &extra;
        }

        for k in (0..n_hidden).rev() {
            let a = &trace.activations[k + 1];
            let dz = &d_act * &a.mapv(|v| 1.0 - v * v);
            check_finite(&dz, k + 1)?;
            grads.layers[k].weights = trace.activations[k].t().dot(&dz);
            grads.layers[k].bias = dz.sum_axis(Axis(0));
            if k > 0 {
                d_act = dz.dot(&self.layers[k].weights.t());
            }
        }
        Ok(grads)
    }

    /// Predicted class per row (ties go to the lowest index).
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let trace = self.trace(inputs)?;
        Ok(trace.probs.rows().into_iter().map(|r| argmax(r.iter().copied()).0).collect())
    }
}

/// Index and value of the largest element; the first one wins ties.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

fn check_finite(m: &Array2<f64>, layer: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(HommError::NonFinite(format!("activations of layer {layer}")))
    }
}

/// Mean negative log-likelihood of `labels` under `probs`, with probabilities
/// floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[[i, y]].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of [`cross_entropy`] with respect to the softmax logits.
pub fn cross_entropy_logit_grad(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(probs, labels)?;
    let b = labels.len() as f64;
    let mut grad = Array2::zeros(probs.dim());
    for (i, &y) in labels.iter().enumerate() {
        if probs[[i, y]] <= PROB_FLOOR {
            continue; // floored: the term is locally constant
        }
        let mut row = grad.row_mut(i);
        row.assign(&(&probs.row(i) / b));
        row[y] -= 1.0 / b;
    }
    Ok(grad)
}

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_labels(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if probs.nrows() != labels.len() {
        return Err(HommError::DimensionMismatch {
            context: "label count",
            expected: probs.nrows(),
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(HommError::contract("cross-entropy needs at least one sample"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= probs.ncols()) {
        return Err(HommError::contract(format!(
            "label {bad} out of range for {} classes",
            probs.ncols()
        )));
    }
    Ok(())
}
