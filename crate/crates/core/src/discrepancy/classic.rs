//! First- and second-order special cases: linear MMD, Gram matching and the
//! centred (CORAL-style) covariance matching.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{check_same_shape, check_same_width, LossGrad};
use crate::error::Result;
use crate::moments::FeatureBatch;

fn column_mean(h: ArrayView2<'_, f64>) -> Array1<f64> {
    h.sum_axis(Axis(0)) / h.nrows() as f64
}

/// `(1/L) * ||mean(h_s) - mean(h_t)||^2`. Batch sizes may differ.
pub fn linear_mmd(source: &FeatureBatch, target: &FeatureBatch) -> Result<f64> {
    check_same_width(source, target)?;
    let diff = column_mean(source.view()) - column_mean(target.view());
    Ok(diff.dot(&diff) / source.width() as f64)
}

pub fn linear_mmd_with_grad(source: &FeatureBatch, target: &FeatureBatch) -> Result<LossGrad> {
    check_same_width(source, target)?;
    let l = source.width() as f64;
    let diff = column_mean(source.view()) - column_mean(target.view());
    let value = diff.dot(&diff) / l;
    let gs_row = &diff * (2.0 / (l * source.rows() as f64));
    let gt_row = &diff * (-2.0 / (l * target.rows() as f64));
    Ok(LossGrad {
        value,
        source: broadcast_rows(&gs_row, source.rows()),
        target: broadcast_rows(&gt_row, target.rows()),
    })
}

fn broadcast_rows(row: &Array1<f64>, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, row.len()), |(_, j)| row[j])
}

fn centred(h: ArrayView2<'_, f64>) -> Array2<f64> {
    &h - &column_mean(h)
}

/// `(1/(b^2 L^2)) * ||H_s^T H_s - H_t^T H_t||_F^2`; with `centralize`, each
/// batch has its column means removed first, which turns the Gram matrices
/// into (unnormalised) covariance matrices.
pub fn gram_loss(source: &FeatureBatch, target: &FeatureBatch, centralize: bool) -> Result<f64> {
    check_same_shape(source, target)?;
    let (hs, ht) = prepared(source, target, centralize);
    let delta = hs.t().dot(&hs) - ht.t().dot(&ht);
    Ok(delta.iter().map(|d| d * d).sum::<f64>() / gram_norm(source))
}

pub fn gram_loss_with_grad(
    source: &FeatureBatch,
    target: &FeatureBatch,
    centralize: bool,
) -> Result<LossGrad> {
    check_same_shape(source, target)?;
    let (hs, ht) = prepared(source, target, centralize);
    let delta = hs.t().dot(&hs) - ht.t().dot(&ht);
    let norm = gram_norm(source);
    let value = delta.iter().map(|d| d * d).sum::<f64>() / norm;

    // d ||D||^2 / dH_s = 2 H_s (D + D^T); the target enters with the opposite sign.
    let sym = &delta + &delta.t();
    let mut gs = hs.dot(&sym) * (2.0 / norm);
    let mut gt = ht.dot(&sym) * (-2.0 / norm);
    if centralize {
        // Centring is a linear projection; its adjoint removes the column mean.
        gs = centred(gs.view());
        gt = centred(gt.view());
    }
    Ok(LossGrad {
        value,
        source: gs,
        target: gt,
    })
}

fn prepared(
    source: &FeatureBatch,
    target: &FeatureBatch,
    centralize: bool,
) -> (Array2<f64>, Array2<f64>) {
    if centralize {
        (centred(source.view()), centred(target.view()))
    } else {
        (source.view().to_owned(), target.view().to_owned())
    }
}

fn gram_norm(batch: &FeatureBatch) -> f64 {
    let (b, l) = (batch.rows() as f64, batch.width() as f64);
    b * b * l * l
}
