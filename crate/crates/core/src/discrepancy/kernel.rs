//! Kernelized moment matching: an MMD with an RBF-type kernel applied to the
//! sampled tensor-power vectors of each sample.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::homm::chain_products;
use super::{check_same_shape, check_same_width, LossGrad};
use crate::error::{HommError, Result};
use crate::moments::{sampled_products, FeatureBatch, IndexMatrix};

/// `k(x, y) = exp(-gamma * ||x - y||^exponent)` with exponent 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    gamma: f64,
    exponent: u8,
}

impl KernelConfig {
    pub fn new(gamma: f64, exponent: u8) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(HommError::config("gamma", format!("must be > 0, got {gamma}")));
        }
        if exponent != 1 && exponent != 2 {
            return Err(HommError::config(
                "kernel_exponent",
                format!("must be 1 or 2, got {exponent}"),
            ));
        }
        Ok(Self { gamma, exponent })
    }

    /// Gaussian form, `exp(-gamma * ||x - y||^2)`.
    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(gamma, 2)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn exponent(&self) -> u8 {
        self.exponent
    }

    fn eval_sq(&self, dist_sq: f64) -> f64 {
        match self.exponent {
            1 => (-self.gamma * dist_sq.sqrt()).exp(),
            _ => (-self.gamma * dist_sq).exp(),
        }
    }

    /// `d k(x, y) / dx = coeff * (x - y)`; returns `coeff`.
    fn grad_coeff(&self, dist_sq: f64, k: f64) -> f64 {
        match self.exponent {
            1 if dist_sq > 0.0 => -self.gamma * k / dist_sq.sqrt(),
            1 => 0.0,
            _ => -2.0 * self.gamma * k,
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            exponent: 2,
        }
    }
}

fn dist_sq(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel_sum(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, kernel: &KernelConfig) -> f64 {
    let mut total = 0.0;
    for a in x.rows() {
        for b in y.rows() {
            total += kernel.eval_sq(dist_sq(a, b));
        }
    }
    total
}

/// Biased (V-statistic) squared MMD between the rows of `x` and `y`.
fn mmd_rows(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, kernel: &KernelConfig) -> f64 {
    let (nx, ny) = (x.nrows() as f64, y.nrows() as f64);
    let value = kernel_sum(x, x, kernel) / (nx * nx) - 2.0 * kernel_sum(x, y, kernel) / (nx * ny)
        + kernel_sum(y, y, kernel) / (ny * ny);
    value.max(0.0)
}

/// Gradient of [`mmd_rows`] with respect to each row of `x` and `y`.
fn mmd_rows_with_grad(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    kernel: &KernelConfig,
) -> (f64, Array2<f64>, Array2<f64>) {
    let (nx, ny) = (x.nrows() as f64, y.nrows() as f64);
    let (wxx, wxy, wyy) = (1.0 / (nx * nx), -2.0 / (nx * ny), 1.0 / (ny * ny));
    let mut gx = Array2::zeros(x.dim());
    let mut gy = Array2::zeros(y.dim());
    let mut value = 0.0;

    // Symmetric blocks: d/dx_i sum_{a,b} k(x_a, x_b) = 2 sum_b dk(x_i, x_b)/dx_i.
    for (block, w, g) in [(x, wxx, &mut gx), (y, wyy, &mut gy)] {
        for (i, a) in block.rows().into_iter().enumerate() {
            for b in block.rows() {
                let d2 = dist_sq(a, b);
                let k = kernel.eval_sq(d2);
                value += w * k;
                let c = 2.0 * w * kernel.grad_coeff(d2, k);
                if c != 0.0 {
                    let mut gi = g.row_mut(i);
                    gi.zip_mut_with(&(&a - &b), |gv, diff| *gv += c * diff);
                }
            }
        }
    }
    for (i, a) in x.rows().into_iter().enumerate() {
        for (j, b) in y.rows().into_iter().enumerate() {
            let d2 = dist_sq(a, b);
            let k = kernel.eval_sq(d2);
            value += wxy * k;
            let c = wxy * kernel.grad_coeff(d2, k);
            if c != 0.0 {
                let diff = &a - &b;
                gx.row_mut(i).scaled_add(c, &diff);
                gy.row_mut(j).scaled_add(-c, &diff);
            }
        }
    }
    if value < 0.0 {
        // Clamped region: the reported loss is constant zero.
        gx.fill(0.0);
        gy.fill(0.0);
        value = 0.0;
    }
    (value, gx, gy)
}

/// Kernel MMD computed directly on raw feature rows. Batch sizes may differ.
pub fn kernel_mmd(source: &FeatureBatch, target: &FeatureBatch, kernel: KernelConfig) -> Result<f64> {
    check_same_width(source, target)?;
    Ok(mmd_rows(source.view(), target.view(), &kernel))
}

/// Kernelized HoMM: kernel MMD between the sampled products of each sample,
/// `(1/b^2) [sum k(S_i,S_j) - 2 sum k(S_i,T_j) + sum k(T_i,T_j)]`, clamped at 0.
pub fn khomm(
    source: &FeatureBatch,
    target: &FeatureBatch,
    idx: &IndexMatrix,
    kernel: KernelConfig,
) -> Result<f64> {
    check_same_shape(source, target)?;
    let s = sampled_products(source, idx)?;
    let t = sampled_products(target, idx)?;
    Ok(mmd_rows(s.view(), t.view(), &kernel))
}

pub fn khomm_with_grad(
    source: &FeatureBatch,
    target: &FeatureBatch,
    idx: &IndexMatrix,
    kernel: KernelConfig,
) -> Result<LossGrad> {
    check_same_shape(source, target)?;
    let s = sampled_products(source, idx)?;
    let t = sampled_products(target, idx)?;
    let (value, gs, gt) = mmd_rows_with_grad(s.view(), t.view(), &kernel);
    Ok(LossGrad {
        value,
        source: chain_products(source.view(), idx, gs.view())?,
        target: chain_products(target.view(), idx, gt.view())?,
    })
}
