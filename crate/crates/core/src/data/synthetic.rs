//! Shifted source/target pairs for desk-scale adaptation experiments.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Domain, LabeledDataset};
use crate::error::{HommError, Result};
use crate::rng::{derive_seed, SplitMix64};

/// How the target domain is derived from the source domain.
///
/// The target distribution is the source distribution pushed through
/// `x -> scale * R(rotation) x + translation`, where `R` rotates the plane
/// of the first two coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSpec {
    /// Radians, counter-clockwise.
    pub rotation: f64,
    /// Empty means no translation; otherwise one entry per input dimension.
    pub translation: Vec<f64>,
    pub scale: f64,
    pub class_count: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Input dimension `d`.
    pub dim: usize,
    /// Distance of the first mixture component mean from the origin.
    pub radius: f64,
    /// Component `k` sits at distance `radius + k * radius_step`. A nonzero
    /// step breaks the rotational symmetry of the mixture.
    pub radius_step: f64,
    /// Ratio of the radial to the tangential standard deviation of each
    /// mixture component, in `(0, 1]`.
    pub anisotropy: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            rotation: 0.0,
            translation: Vec::new(),
            scale: 1.0,
            class_count: 3,
            samples_per_class: 500,
            noise_std: 0.5,
            seed: 0,
            dim: 2,
            radius: 2.0,
            radius_step: 0.0,
            anisotropy: 0.5,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(HommError::config("scale", "must be > 0"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(HommError::config("noise_std", "must be >= 0"));
        }
        if self.dim < 2 {
            return Err(HommError::config("dim", "must be at least 2"));
        }
        if self.class_count < 2 {
            return Err(HommError::config("class_count", "must be at least 2"));
        }
        if self.samples_per_class == 0 {
            return Err(HommError::config("samples_per_class", "must be positive"));
        }
        if !self.translation.is_empty() && self.translation.len() != self.dim {
            return Err(HommError::config(
                "translation",
                format!("needs {} entries, got {}", self.dim, self.translation.len()),
            ));
        }
        if !(self.anisotropy > 0.0 && self.anisotropy <= 1.0) {
            return Err(HommError::config("anisotropy", "must lie in (0, 1]"));
        }
        if !self.rotation.is_finite() {
            return Err(HommError::config("rotation", "must be finite"));
        }
        if !self.radius.is_finite() || !self.radius_step.is_finite() {
            return Err(HommError::config("radius", "radius and radius_step must be finite"));
        }
        Ok(())
    }

    /// Applies the domain shift to one point in place.
    fn shift(&self, x: &mut [f64]) {
        let (s, c) = self.rotation.sin_cos();
        let (a, b) = (x[0], x[1]);
        x[0] = c * a - s * b;
        x[1] = s * a + c * b;
        for (i, v) in x.iter_mut().enumerate() {
            *v *= self.scale;
            if let Some(t) = self.translation.get(i) {
                *v += t;
            }
        }
    }

    fn rng_for(&self, domain: Domain) -> SplitMix64 {
        let stream = match domain {
            Domain::Source => 1,
            Domain::Target => 2,
        };
        SplitMix64::new(derive_seed(self.seed, stream, 0))
    }
}

/// Exact class-conditional means of the mixture in `domain`, one row per class.
pub fn component_means(spec: &ShiftSpec, domain: Domain) -> Array2<f64> {
    let mut means = Array2::zeros((spec.class_count, spec.dim));
    for k in 0..spec.class_count {
        let angle = TAU * k as f64 / spec.class_count as f64;
        let mut m = vec![0.0; spec.dim];
        let r = spec.radius + k as f64 * spec.radius_step;
        m[0] = r * angle.cos();
        m[1] = r * angle.sin();
        if domain == Domain::Target {
            spec.shift(&mut m);
        }
        means.row_mut(k).assign(&ndarray::ArrayView1::from(&m));
    }
    means
}

fn sample_mixture(spec: &ShiftSpec, domain: Domain) -> Result<LabeledDataset> {
    let mut rng = spec.rng_for(domain);
    let n = spec.class_count * spec.samples_per_class;
    let source_means = component_means(spec, Domain::Source);
    let mut features = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    let mut point = vec![0.0; spec.dim];
    for k in 0..spec.class_count {
        let angle = TAU * k as f64 / spec.class_count as f64;
        let (radial, tangential) = ((angle.cos(), angle.sin()), (-angle.sin(), angle.cos()));
        for _ in 0..spec.samples_per_class {
            // Elongated along the tangent of the circle of means.
            let zr = rng.normal() * spec.noise_std * spec.anisotropy;
            let zt = rng.normal() * spec.noise_std;
            point[0] = source_means[[k, 0]] + zr * radial.0 + zt * tangential.0;
            point[1] = source_means[[k, 1]] + zr * radial.1 + zt * tangential.1;
            for v in point.iter_mut().skip(2) {
                *v = rng.normal() * spec.noise_std;
            }
            if domain == Domain::Target {
                spec.shift(&mut point);
            }
            let row = labels.len();
            features.row_mut(row).assign(&ndarray::ArrayView1::from(&point));
            labels.push(k);
        }
    }
    LabeledDataset::new(features, Some(labels), domain)
}

/// Gaussian mixture with one anisotropic component per class on a circle,
/// and its shifted counterpart sampled independently.
pub fn gen_gaussian_mixture_pair(spec: &ShiftSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    Ok((
        sample_mixture(spec, Domain::Source)?,
        sample_mixture(spec, Domain::Target)?,
    ))
}

/// `n` two-moons points in the plane, `n/2` (rounded up) in class 0.
/// Centred at the origin, with isotropic Gaussian noise.
pub fn two_moons(n: usize, noise_std: f64, rng: &mut SplitMix64) -> (Array2<f64>, Vec<usize>) {
    let n0 = n.div_ceil(2);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(i >= n0);
        let t = PI * rng.next_f64();
        let (px, py) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        x[[i, 0]] = px - 0.5 + noise_std * rng.normal();
        x[[i, 1]] = py - 0.25 + noise_std * rng.normal();
        y.push(class);
    }
    (x, y)
}

fn moons_domain(spec: &ShiftSpec, domain: Domain) -> Result<LabeledDataset> {
    let mut rng = spec.rng_for(domain);
    let (moons, labels) = two_moons(2 * spec.samples_per_class, spec.noise_std, &mut rng);
    let mut features = Array2::zeros((moons.nrows(), spec.dim));
    let mut point = vec![0.0; spec.dim];
    for (i, row) in moons.rows().into_iter().enumerate() {
        point[0] = row[0] * spec.radius;
        point[1] = row[1] * spec.radius;
        for v in point.iter_mut().skip(2) {
            *v = rng.normal() * spec.noise_std;
        }
        if domain == Domain::Target {
            spec.shift(&mut point);
        }
        features.row_mut(i).assign(&ndarray::ArrayView1::from(&point));
    }
    LabeledDataset::new(features, Some(labels), domain)
}

/// Two interleaving half circles (scaled by `radius`) and their shifted copy.
pub fn gen_two_moons_pair(spec: &ShiftSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    if spec.class_count != 2 {
        return Err(HommError::config(
            "class_count",
            format!("two moons has exactly 2 classes, got {}", spec.class_count),
        ));
    }
    Ok((
        moons_domain(spec, Domain::Source)?,
        moons_domain(spec, Domain::Target)?,
    ))
}
