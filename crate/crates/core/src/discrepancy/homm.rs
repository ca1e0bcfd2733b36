//! Higher-order moment matching: exact, grouped and randomly sampled.

use std::ops::Range;

use ndarray::{Array2, ArrayView2, ArrayViewMut1};

use super::{check_same_shape, check_same_width, LossGrad};
use crate::error::Result;
use crate::moments::{
    check_index_range, mean_tensor_power, partition_groups, sampled_products, sum_tensor_power,
    FeatureBatch, GroupPartition, IndexMatrix, MomentOrder, DEFAULT_MEMORY_CAP,
};

/// `(1/L^p) * ||mean(h_s^{⊗p}) - mean(h_t^{⊗p})||_F^2`.
///
/// Batch sizes may differ; each domain is averaged over its own rows.
pub fn homm_full(source: &FeatureBatch, target: &FeatureBatch, p: MomentOrder) -> Result<f64> {
    check_same_width(source, target)?;
    if p.0 == 0 {
        return Ok(0.0);
    }
    let ms = mean_tensor_power(source, p)?;
    let mt = mean_tensor_power(target, p)?;
    let sq: f64 = ms.iter().zip(&mt).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / ms.len() as f64)
}

pub fn homm_full_with_grad(
    source: &FeatureBatch,
    target: &FeatureBatch,
    p: MomentOrder,
) -> Result<LossGrad> {
    check_same_width(source, target)?;
    if p.0 == 0 {
        return Ok(LossGrad::zero_for(source, target));
    }
    let width = source.width();
    let cols = 0..width;
    let mut delta = sum_tensor_power(source.view(), cols.clone(), p, DEFAULT_MEMORY_CAP)?;
    let sum_t = sum_tensor_power(target.view(), cols.clone(), p, DEFAULT_MEMORY_CAP)?;
    let (bs, bt) = (source.rows() as f64, target.rows() as f64);
    for (d, t) in delta.iter_mut().zip(&sum_t) {
        *d = *d / bs - t / bt;
    }
    let inv_len = 1.0 / delta.len() as f64;
    let value = delta.iter().map(|d| d * d).sum::<f64>() * inv_len;

    let mut gs = Array2::zeros(source.view().dim());
    let mut gt = Array2::zeros(target.view().dim());
    tensor_grad_rows(source.view(), &cols, p.0 as usize, &delta, 2.0 * inv_len / bs, &mut gs);
    tensor_grad_rows(target.view(), &cols, p.0 as usize, &delta, -2.0 * inv_len / bt, &mut gt);
    Ok(LossGrad {
        value,
        source: gs,
        target: gt,
    })
}

/// Group moment matching over `n_g` contiguous neuron groups of width
/// `floor(L/n_g)`, scaled by `1/(b^2 * width^p)`.
pub fn homm_group(
    source: &FeatureBatch,
    target: &FeatureBatch,
    p: MomentOrder,
    n_groups: usize,
) -> Result<f64> {
    let partition = partition_groups(source.width(), n_groups)?;
    homm_group_with(source, target, p, &partition)
}

/// As [`homm_group`] with an explicit partition. Each group is scaled by its
/// own `width^p`, which matters only for a widened final group.
pub fn homm_group_with(
    source: &FeatureBatch,
    target: &FeatureBatch,
    p: MomentOrder,
    partition: &GroupPartition,
) -> Result<f64> {
    check_same_shape(source, target)?;
    if p.0 == 0 {
        return Ok(0.0);
    }
    let b = source.rows() as f64;
    let mut total = 0.0;
    for range in partition.groups() {
        check_group_range(range, source.width())?;
        let ss = sum_tensor_power(source.view(), range.clone(), p, DEFAULT_MEMORY_CAP)?;
        let st = sum_tensor_power(target.view(), range.clone(), p, DEFAULT_MEMORY_CAP)?;
        let sq: f64 = ss.iter().zip(&st).map(|(a, c)| (a - c) * (a - c)).sum();
        total += sq / (b * b * ss.len() as f64);
    }
    Ok(total)
}

pub fn homm_group_with_grad(
    source: &FeatureBatch,
    target: &FeatureBatch,
    p: MomentOrder,
    partition: &GroupPartition,
) -> Result<LossGrad> {
    check_same_shape(source, target)?;
    if p.0 == 0 {
        return Ok(LossGrad::zero_for(source, target));
    }
    let b = source.rows() as f64;
    let mut out = LossGrad::zero_for(source, target);
    for range in partition.groups() {
        check_group_range(range, source.width())?;
        let mut delta = sum_tensor_power(source.view(), range.clone(), p, DEFAULT_MEMORY_CAP)?;
        let st = sum_tensor_power(target.view(), range.clone(), p, DEFAULT_MEMORY_CAP)?;
        delta.iter_mut().zip(&st).for_each(|(d, t)| *d -= t);
        let scale = 1.0 / (b * b * delta.len() as f64);
        out.value += delta.iter().map(|d| d * d).sum::<f64>() * scale;
        tensor_grad_rows(source.view(), range, p.0 as usize, &delta, 2.0 * scale, &mut out.source);
        tensor_grad_rows(target.view(), range, p.0 as usize, &delta, -2.0 * scale, &mut out.target);
    }
    Ok(out)
}

fn check_group_range(range: &Range<usize>, width: usize) -> Result<()> {
    if range.end > width || range.is_empty() {
        return Err(crate::error::HommError::contract(format!(
            "group {range:?} does not fit adapted width {width}"
        )));
    }
    Ok(())
}

/// Random sampling matching:
/// `(1/(b^2 N)) * sum_k (sum_i prod_j h_s[i, idx[k,j]] - sum_i prod_j h_t[i, idx[k,j]])^2`.
pub fn homm_sampled(
    source: &FeatureBatch,
    target: &FeatureBatch,
    idx: &IndexMatrix,
) -> Result<f64> {
    check_same_shape(source, target)?;
    let ps = sampled_products(source, idx)?;
    let pt = sampled_products(target, idx)?;
    let b = source.rows() as f64;
    let n = idx.n_rows() as f64;
    let sq: f64 = ps
        .sum_axis(ndarray::Axis(0))
        .iter()
        .zip(pt.sum_axis(ndarray::Axis(0)).iter())
        .map(|(a, c)| (a - c) * (a - c))
        .sum();
    Ok(sq / (b * b * n))
}

pub fn homm_sampled_with_grad(
    source: &FeatureBatch,
    target: &FeatureBatch,
    idx: &IndexMatrix,
) -> Result<LossGrad> {
    check_same_shape(source, target)?;
    let ps = sampled_products(source, idx)?;
    let pt = sampled_products(target, idx)?;
    let b = source.rows() as f64;
    let n = idx.n_rows() as f64;
    let diff = ps.sum_axis(ndarray::Axis(0)) - pt.sum_axis(ndarray::Axis(0));
    let scale = 1.0 / (b * b * n);
    let value = diff.iter().map(|d| d * d).sum::<f64>() * scale;

    // d value / d prod[i, k] = 2 * scale * diff[k] for every source row i.
    let coeff = diff.mapv(|d| 2.0 * scale * d);
    let g_src = Array2::from_shape_fn(ps.dim(), |(_, k)| coeff[k]);
    let g_tgt = g_src.mapv(|v| -v);
    Ok(LossGrad {
        value,
        source: chain_products(source.view(), idx, g_src.view())?,
        target: chain_products(target.view(), idx, g_tgt.view())?,
    })
}

/// Back-propagates `d loss / d prod[i, k]` to `d loss / d h[i, a]`, where
/// `prod[i, k] = prod_j h[i, idx[k, j]]`.
pub(crate) fn chain_products(
    h: ArrayView2<'_, f64>,
    idx: &IndexMatrix,
    upstream: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_index_range(idx, h.ncols())?;
    let order = idx.order();
    let mut grad = Array2::zeros(h.dim());
    let mut prefix = vec![0.0; order + 1];
    let mut suffix = vec![0.0; order + 1];
    for (i, row) in h.rows().into_iter().enumerate() {
        let mut g_row = grad.row_mut(i);
        for (k, coords) in idx.rows().enumerate() {
            let w = upstream[[i, k]];
            if w == 0.0 {
                continue;
            }
            accumulate_product_grad(coords, |j| row[j], w, &mut prefix, &mut suffix, &mut g_row);
        }
    }
    Ok(grad)
}

/// Adds `scale * sum_coord delta[coord] * d(prod_q u[coord_q]) / du` to each
/// row of `grad` restricted to `cols`, with `u` the row of `h` over `cols`.
fn tensor_grad_rows(
    h: ArrayView2<'_, f64>,
    cols: &Range<usize>,
    order: usize,
    delta: &[f64],
    scale: f64,
    grad: &mut Array2<f64>,
) {
    let width = cols.len();
    let mut digits = vec![0usize; order];
    let mut prefix = vec![0.0; order + 1];
    let mut suffix = vec![0.0; order + 1];
    for (i, row) in h.rows().into_iter().enumerate() {
        let mut g_row = grad.slice_mut(ndarray::s![i, cols.clone()]);
        digits.iter_mut().for_each(|d| *d = 0);
        for &d in delta {
            let w = scale * d;
            if w != 0.0 {
                accumulate_product_grad(
                    &digits,
                    |j| row[cols.start + j],
                    w,
                    &mut prefix,
                    &mut suffix,
                    &mut g_row,
                );
            }
            for digit in digits.iter_mut().rev() {
                *digit += 1;
                if *digit < width {
                    break;
                }
                *digit = 0;
            }
        }
    }
}

/// Adds `w * d(prod_q u[coords_q]) / du` into `grad`.
fn accumulate_product_grad(
    coords: &[usize],
    u: impl Fn(usize) -> f64,
    w: f64,
    prefix: &mut [f64],
    suffix: &mut [f64],
    grad: &mut ArrayViewMut1<'_, f64>,
) {
    let order = coords.len();
    prefix[0] = 1.0;
    for q in 0..order {
        prefix[q + 1] = prefix[q] * u(coords[q]);
    }
    suffix[order] = 1.0;
    for q in (0..order).rev() {
        suffix[q] = suffix[q + 1] * u(coords[q]);
    }
    for q in 0..order {
        grad[coords[q]] += w * prefix[q] * suffix[q + 1];
    }
}
