//! Tensor powers, batch moment tensors, sampled tensor coordinates and
//! neuron groups.
//!
//! Moment tensors are stored flat in row-major order: the entry at
//! multi-index `(i, j, .., k)` of an order-`p` tensor over width `L` lives at
//! `((i * L + j) * L + ..) * L + k`.

use std::ops::Range;

use ndarray::{Array2, ArrayView2};

use crate::error::{HommError, Result};
use crate::rng::SplitMix64;

/// Default upper bound on the number of scalars in one dense moment tensor.
pub const DEFAULT_MEMORY_CAP: usize = 10_000_000;

/// A `b x L` matrix of adapted-layer activations for one domain's mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    data: Array2<f64>,
}

impl FeatureBatch {
    /// Wraps a matrix, rejecting empty shapes and non-finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(HommError::contract(format!(
                "feature batch must be non-empty, got {rows}x{cols}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(HommError::NonFinite(format!(
                "feature batch entry ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let b = rows.len();
        let l = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(b * l);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != l {
                return Err(HommError::contract(format!(
                    "row {i} has width {}, expected {l}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let data = Array2::from_shape_vec((b, l), flat)
            .map_err(|e| HommError::contract(e.to_string()))?;
        Self::new(data)
    }

    /// Batch size `b`.
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// Adapted-layer width `L`.
    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Order `p` of a moment tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentOrder(pub u32);

impl MomentOrder {
    pub fn get(self) -> u32 {
        self.0
    }

    /// Number of entries `width^p`, checked against `cap`.
    pub fn tensor_len(self, width: usize, cap: usize) -> Result<usize> {
        let too_big = || HommError::Capacity {
            width,
            order: self.0,
            needed: format!("{width}^{}", self.0),
            cap,
        };
        let len = (width as u64)
            .checked_pow(self.0)
            .filter(|&n| n <= cap as u64)
            .ok_or_else(too_big)?;
        Ok(len as usize)
    }
}

impl From<u32> for MomentOrder {
    fn from(p: u32) -> Self {
        MomentOrder(p)
    }
}

/// `u^{⊗p}` flattened row-major, under [`DEFAULT_MEMORY_CAP`].
pub fn tensor_power(u: &[f64], p: MomentOrder) -> Result<Vec<f64>> {
    tensor_power_capped(u, p, DEFAULT_MEMORY_CAP)
}

pub fn tensor_power_capped(u: &[f64], p: MomentOrder, cap: usize) -> Result<Vec<f64>> {
    let len = p.tensor_len(u.len(), cap)?;
    let mut out = Vec::with_capacity(len);
    out.push(1.0);
    for _ in 0..p.0 {
        out = out
            .iter()
            .flat_map(|&prefix| u.iter().map(move |&x| prefix * x))
            .collect();
    }
    Ok(out)
}

/// Mean over the rows of `batch` of their order-`p` tensor powers.
pub fn mean_tensor_power(batch: &FeatureBatch, p: MomentOrder) -> Result<Vec<f64>> {
    mean_tensor_power_capped(batch, p, DEFAULT_MEMORY_CAP)
}

pub fn mean_tensor_power_capped(
    batch: &FeatureBatch,
    p: MomentOrder,
    cap: usize,
) -> Result<Vec<f64>> {
    let mut acc = sum_tensor_power(batch.view(), 0..batch.width(), p, cap)?;
    let scale = 1.0 / batch.rows() as f64;
    acc.iter_mut().for_each(|v| *v *= scale);
    Ok(acc)
}

/// Sum over rows of the tensor power of the columns in `cols`.
pub(crate) fn sum_tensor_power(
    rows: ArrayView2<'_, f64>,
    cols: Range<usize>,
    p: MomentOrder,
    cap: usize,
) -> Result<Vec<f64>> {
    let width = cols.len();
    let len = p.tensor_len(width, cap)?;
    let mut acc = vec![0.0; len];
    let mut scratch = Vec::with_capacity(len);
    let mut next = Vec::with_capacity(len);
    for row in rows.rows() {
        let u = row.slice(ndarray::s![cols.clone()]);
        scratch.clear();
        scratch.push(1.0);
        for _ in 0..p.0 {
            next.clear();
            for &prefix in &scratch {
                next.extend(u.iter().map(|&x| prefix * x));
            }
            std::mem::swap(&mut scratch, &mut next);
        }
        acc.iter_mut().zip(&scratch).for_each(|(a, v)| *a += v);
    }
    Ok(acc)
}

/// `N x p` matrix of tensor coordinates, each entry in `[0, L)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    order: usize,
    data: Vec<usize>,
}

impl IndexMatrix {
    pub fn from_rows<R: AsRef<[usize]>>(rows: &[R]) -> Result<Self> {
        let order = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| HommError::contract("index matrix needs at least one row"))?;
        if order == 0 {
            return Err(HommError::contract("index matrix rows must be non-empty"));
        }
        let mut data = Vec::with_capacity(rows.len() * order);
        for row in rows {
            let row = row.as_ref();
            if row.len() != order {
                return Err(HommError::contract(format!(
                    "index matrix rows must all have length {order}"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { order, data })
    }

    /// Every coordinate of the order-`p` tensor over width `L`, in row-major order.
    pub fn exhaustive(width: usize, p: MomentOrder) -> Result<Self> {
        if width == 0 || p.0 == 0 {
            return Err(HommError::contract("exhaustive index matrix needs L >= 1 and p >= 1"));
        }
        let n = p.tensor_len(width, DEFAULT_MEMORY_CAP)?;
        let order = p.0 as usize;
        let mut data = Vec::with_capacity(n * order);
        let mut digits = vec![0usize; order];
        for _ in 0..n {
            data.extend_from_slice(&digits);
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < width {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self { order, data })
    }

    /// Number of sampled coordinates `N`.
    pub fn n_rows(&self) -> usize {
        self.data.len() / self.order
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, k: usize) -> &[usize] {
        &self.data[k * self.order..(k + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.data.chunks_exact(self.order)
    }

    pub fn max_index(&self) -> usize {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

/// Draws `N` coordinates of an order-`p` tensor over width `L`, i.i.d. uniform
/// with replacement. Fully determined by the arguments.
pub fn sample_indices(width: usize, p: MomentOrder, n: usize, seed: u64) -> Result<IndexMatrix> {
    if width == 0 || p.0 == 0 || n == 0 {
        return Err(HommError::contract(format!(
            "sample_indices needs L >= 1, p >= 1, N >= 1 (got L={width}, p={}, N={n})",
            p.0
        )));
    }
    let order = p.0 as usize;
    let mut rng = SplitMix64::new(seed);
    let data = (0..n * order)
        .map(|_| rng.below(width as u64) as usize)
        .collect();
    Ok(IndexMatrix { order, data })
}

/// `b x N` matrix whose entry `[i, k]` is the product of `batch[i, j]` over
/// the coordinates `j` in index row `k`.
pub fn sampled_products(batch: &FeatureBatch, idx: &IndexMatrix) -> Result<Array2<f64>> {
    check_index_range(idx, batch.width())?;
    let h = batch.view();
    let n = idx.n_rows();
    Ok(Array2::from_shape_fn((batch.rows(), n), |(i, k)| {
        idx.row(k).iter().map(|&j| h[[i, j]]).product()
    }))
}

pub(crate) fn check_index_range(idx: &IndexMatrix, width: usize) -> Result<()> {
    if idx.max_index() >= width {
        return Err(HommError::contract(format!(
            "index {} out of range for adapted width {width}",
            idx.max_index()
        )));
    }
    Ok(())
}

/// Disjoint contiguous coordinate ranges of the adapted layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Range<usize>>,
}

impl GroupPartition {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Nominal group width `floor(L / n_g)`.
    pub fn width(&self) -> usize {
        self.groups[0].len()
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }
}

/// Splits `L` coordinates into `n_g` groups of width `floor(L / n_g)`; the
/// trailing `L mod n_g` coordinates are left out.
pub fn partition_groups(width: usize, n_groups: usize) -> Result<GroupPartition> {
    partition_groups_with(width, n_groups, false)
}

/// As [`partition_groups`], but with `widen_last` the final group absorbs
/// the trailing remainder instead of dropping it.
pub fn partition_groups_with(
    width: usize,
    n_groups: usize,
    widen_last: bool,
) -> Result<GroupPartition> {
    if n_groups == 0 || n_groups > width {
        return Err(HommError::contract(format!(
            "group count must satisfy 1 <= n_g <= L (got n_g={n_groups}, L={width})"
        )));
    }
    let w = width / n_groups;
    let mut groups: Vec<Range<usize>> = (0..n_groups).map(|k| k * w..(k + 1) * w).collect();
    if widen_last {
        if let Some(last) = groups.last_mut() {
            last.end = width;
        }
    }
    Ok(GroupPartition { groups })
}
