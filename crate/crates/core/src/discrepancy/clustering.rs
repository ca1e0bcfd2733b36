//! Target-domain discriminative terms: conditional entropy, the pseudo-label
//! clustering loss and moving-average class centres.

use ndarray::{Array2, ArrayView2};

use crate::error::{HommError, Result};
use crate::moments::FeatureBatch;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_probability_rows(probs: ArrayView2<'_, f64>) -> Result<()> {
    for (i, row) in probs.rows().into_iter().enumerate() {
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(HommError::contract(format!(
                "probability row {i} has entries outside [0, 1]"
            )));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(HommError::contract(format!(
                "probability row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Mean Shannon entropy (nats) of the rows of a softmax output matrix.
pub fn entropy_loss(probs: ArrayView2<'_, f64>) -> Result<f64> {
    check_probability_rows(probs)?;
    let n = probs.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = probs.iter().map(|&p| -xlogx(p)).sum();
    Ok((total / n as f64).max(0.0))
}

/// Gradient of [`entropy_loss`] with respect to the logits that produced
/// `probs` through a softmax: `-(1/n) p_k (ln p_k + H_i)`.
pub fn entropy_logit_grad(probs: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = probs.nrows().max(1) as f64;
    let mut grad = Array2::zeros(probs.dim());
    for (i, row) in probs.rows().into_iter().enumerate() {
        let h: f64 = row.iter().map(|&p| -xlogx(p)).sum();
        for (k, &p) in row.iter().enumerate() {
            if p > 0.0 {
                grad[[i, k]] = -p * (p.ln() + h) / n;
            }
        }
    }
    grad
}

/// One confidently predicted target sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabel {
    /// Row of the sample within its batch.
    pub row: usize,
    pub label: usize,
    pub confidence: f64,
}

/// The confident subset of a target batch with its pseudo-labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoLabelAssignment {
    entries: Vec<PseudoLabel>,
}

impl PseudoLabelAssignment {
    pub fn new(entries: Vec<PseudoLabel>) -> Self {
        Self { entries }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PseudoLabel> + '_ {
        self.entries.iter()
    }

    pub fn sample_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.row).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    fn validate(&self, batch_rows: usize, n_classes: usize) -> Result<()> {
        for e in &self.entries {
            if e.row >= batch_rows {
                return Err(HommError::contract(format!(
                    "pseudo-label row {} outside batch of {batch_rows}",
                    e.row
                )));
            }
            if e.label >= n_classes {
                return Err(HommError::contract(format!(
                    "pseudo-label {} out of range for {n_classes} classes",
                    e.label
                )));
            }
        }
        Ok(())
    }
}

/// Per-class centroids of target features, maintained by moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCenters {
    centers: Array2<f64>,
    alpha: f64,
}

/// What to do with a class that has no pseudo-labelled sample in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentClassPolicy {
    /// Leave the centre untouched.
    #[default]
    Skip,
    /// Apply the moving average with a zero increment, pulling the centre
    /// toward the origin.
    Literal,
}

impl ClassCenters {
    /// All-zero centres for `n_classes` classes over adapted width `width`.
    pub fn zeros(n_classes: usize, width: usize, alpha: f64) -> Result<Self> {
        Self::new(Array2::zeros((n_classes, width)), alpha)
    }

    pub fn new(centers: Array2<f64>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(HommError::config("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(HommError::NonFinite("class centres".into()));
        }
        Ok(Self { centers, alpha })
    }

    pub fn n_classes(&self) -> usize {
        self.centers.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.centers.view()
    }
}

fn check_centers(feats: &FeatureBatch, centers: &ClassCenters) -> Result<()> {
    if centers.centers.ncols() != feats.width() {
        return Err(HommError::DimensionMismatch {
            context: "class centre width",
            expected: feats.width(),
            actual: centers.centers.ncols(),
        });
    }
    Ok(())
}

/// Mean squared distance of each pseudo-labelled sample to its class centre;
/// zero for an empty assignment.
pub fn clustering_loss(
    target_feats: &FeatureBatch,
    assignment: &PseudoLabelAssignment,
    centers: &ClassCenters,
) -> Result<f64> {
    check_centers(target_feats, centers)?;
    assignment.validate(target_feats.rows(), centers.n_classes())?;
    if assignment.is_empty() {
        return Ok(0.0);
    }
    let h = target_feats.view();
    let total: f64 = assignment
        .iter()
        .map(|e| {
            let diff = &h.row(e.row) - &centers.centers.row(e.label);
            diff.dot(&diff)
        })
        .sum();
    Ok(total / assignment.len() as f64)
}

/// [`clustering_loss`] and its gradient with respect to the target features.
/// Centres are held constant.
pub fn clustering_loss_with_grad(
    target_feats: &FeatureBatch,
    assignment: &PseudoLabelAssignment,
    centers: &ClassCenters,
) -> Result<(f64, Array2<f64>)> {
    check_centers(target_feats, centers)?;
    assignment.validate(target_feats.rows(), centers.n_classes())?;
    let mut grad = Array2::zeros(target_feats.view().dim());
    if assignment.is_empty() {
        return Ok((0.0, grad));
    }
    let h = target_feats.view();
    let m = assignment.len() as f64;
    let mut total = 0.0;
    for e in assignment.iter() {
        let diff = &h.row(e.row) - &centers.centers.row(e.label);
        total += diff.dot(&diff);
        grad.row_mut(e.row).scaled_add(2.0 / m, &diff);
    }
    Ok((total / m, grad))
}

/// Moving-average centre update, skipping classes absent from the batch.
pub fn update_centers(
    centers: &ClassCenters,
    target_feats: &FeatureBatch,
    assignment: &PseudoLabelAssignment,
) -> Result<ClassCenters> {
    update_centers_with(centers, target_feats, assignment, AbsentClassPolicy::Skip)
}

/// `c_j <- alpha c_j + (1 - alpha) * (sum of class-j features) / (1 + count_j)`.
pub fn update_centers_with(
    centers: &ClassCenters,
    target_feats: &FeatureBatch,
    assignment: &PseudoLabelAssignment,
    policy: AbsentClassPolicy,
) -> Result<ClassCenters> {
    check_centers(target_feats, centers)?;
    assignment.validate(target_feats.rows(), centers.n_classes())?;
    let h = target_feats.view();
    let mut sums = Array2::<f64>::zeros(centers.centers.dim());
    let mut counts = vec![0usize; centers.n_classes()];
    for e in assignment.iter() {
        sums.row_mut(e.label).scaled_add(1.0, &h.row(e.row));
        counts[e.label] += 1;
    }
    let alpha = centers.alpha;
    let mut next = centers.centers.clone();
    for (j, &count) in counts.iter().enumerate() {
        if count == 0 && policy == AbsentClassPolicy::Skip {
            continue;
        }
        let increment = &sums.row(j) / (1.0 + count as f64);
        let updated = &centers.centers.row(j) * alpha + &increment * (1.0 - alpha);
        next.row_mut(j).assign(&updated);
    }
    ClassCenters::new(next, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn feats(rows: &[&[f64]]) -> FeatureBatch {
        FeatureBatch::from_rows(rows).unwrap()
    }

    fn one(row: usize, label: usize) -> PseudoLabelAssignment {
        PseudoLabelAssignment::new(vec![PseudoLabel {
            row,
            label,
            confidence: 0.9,
        }])
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_loss(array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap(), 0.0);
        let h = entropy_loss(array![[0.5, 0.5]].view()).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);
        let c = 7;
        let uniform = Array2::from_elem((5, c), 1.0 / c as f64);
        assert!((entropy_loss(uniform.view()).unwrap() - (c as f64).ln()).abs() < 1e-12);
        assert!(entropy_loss(array![[0.5, 0.6]].view()).is_err());
        assert!(entropy_loss(array![[1.5, -0.5]].view()).is_err());
    }

    #[test]
    fn entropy_grad_matches_finite_differences() {
        let logits = array![[0.3, -1.2, 0.8], [2.0, 0.1, -0.4]];
        let softmax = |z: &Array2<f64>| {
            let mut p = z.mapv(f64::exp);
            for mut row in p.rows_mut() {
                let s = row.sum();
                row /= s;
            }
            p
        };
        let g = entropy_logit_grad(softmax(&logits).view());
        let eps = 1e-6;
        for i in 0..2 {
            for k in 0..3 {
                let mut up = logits.clone();
                up[[i, k]] += eps;
                let mut down = logits.clone();
                down[[i, k]] -= eps;
                let fd = (entropy_loss(softmax(&up).view()).unwrap()
                    - entropy_loss(softmax(&down).view()).unwrap())
                    / (2.0 * eps);
                assert!((fd - g[[i, k]]).abs() < 1e-8, "({i},{k}) fd {fd} vs {}", g[[i, k]]);
            }
        }
    }

    #[test]
    fn clustering_loss_examples() {
        let centers = ClassCenters::new(array![[0.0, 0.0], [1.0, 1.0]], 0.5).unwrap();
        let f = feats(&[&[1.0, 1.0]]);
        assert_eq!(clustering_loss(&f, &one(0, 0), &centers).unwrap(), 2.0);
        assert_eq!(clustering_loss(&f, &one(0, 1), &centers).unwrap(), 0.0);
        assert_eq!(
            clustering_loss(&f, &PseudoLabelAssignment::empty(), &centers).unwrap(),
            0.0
        );
        assert!(clustering_loss(&f, &one(0, 2), &centers).is_err());
        assert!(clustering_loss(&f, &one(1, 0), &centers).is_err());
    }

    #[test]
    fn center_update_examples() {
        let centers = ClassCenters::zeros(2, 2, 0.5).unwrap();
        let f = feats(&[&[1.0, 1.0]]);
        let next = update_centers(&centers, &f, &one(0, 0)).unwrap();
        assert_eq!(next.view(), array![[0.25, 0.25], [0.0, 0.0]]);

        // Class 1 absent: untouched by default, shrunk under the literal rule.
        let start = ClassCenters::new(array![[0.0, 0.0], [0.8, -0.4]], 0.5).unwrap();
        let skip = update_centers(&start, &f, &one(0, 0)).unwrap();
        assert_eq!(skip.view().row(1), array![0.8, -0.4]);
        let literal =
            update_centers_with(&start, &f, &one(0, 0), AbsentClassPolicy::Literal).unwrap();
        assert_eq!(literal.view().row(1), array![0.4, -0.2]);

        let frozen = ClassCenters::new(array![[0.3, 0.3], [0.1, 0.2]], 1.0).unwrap();
        let after = update_centers(&frozen, &f, &one(0, 0)).unwrap();
        assert_eq!(after, frozen);

        assert!(ClassCenters::zeros(2, 2, 1.5).is_err());
    }
}
