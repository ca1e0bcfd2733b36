//! Central-difference gradient verification.

use super::mlp::{Gradients, MlpNetwork};

/// Central differences of `f` at `point`, one coordinate at a time.
pub fn central_differences(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + step;
            let up = f(&probe);
            probe[i] = point[i] - step;
            let down = f(&probe);
            probe[i] = point[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps parameters whose true
/// gradient is essentially zero from being judged on rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.checks.iter().map(|c| c.relative_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> + '_ {
        self.checks.iter().filter(move |c| c.relative_error >= self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Default denominator floor for [`relative_error`].
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-7;

/// Compares `analytic` against central differences of `loss` over every
/// network parameter.
pub fn finite_diff_check(
    net: &MlpNetwork,
    loss: impl Fn(&MlpNetwork) -> f64,
    analytic: &Gradients,
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    let analytic = analytic.flatten();
    let mut probe = net.clone();
    let numeric = central_differences(
        |params| {
            probe.set_params(params).expect("parameter count is fixed");
            loss(&probe)
        },
        &net.params(),
        step,
    );
    let checks = analytic
        .iter()
        .zip(&numeric)
        .enumerate()
        .map(|(index, (&a, &n))| ParamCheck {
            index,
            analytic: a,
            numeric: n,
            relative_error: relative_error(a, n, RELATIVE_ERROR_FLOOR),
        })
        .collect();
    GradCheckReport { checks, tolerance }
}
