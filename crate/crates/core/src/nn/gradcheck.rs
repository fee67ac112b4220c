//! Central finite-difference gradient checking in f64.

use super::network::{Gradients, NetworkParams, TRAINABLE_COUNT, TRAINABLE_NAMES};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate (and tensor name, for network checks) of the worst error.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU/max-pool/selection
    /// boundary, where the function is not differentiable.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error <= tolerance
    }

    fn merge(&mut self, other: GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            if other.worst.is_some() {
                self.worst = other.worst;
            }
        }
        self.checked += other.checked;
        self.skipped += other.skipped;
    }
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exactly-zero
/// gradients from dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Compares `analytic[i]` with `(L(x + h e_i) - L(x - h e_i)) / 2h` at each
/// requested coordinate.
///
/// `loss` returns the scalar loss and a fingerprint of the piecewise branch
/// taken; coordinates where the fingerprint at `x +- h` differs from the one
/// at `x` are skipped.
pub fn gradient_check(
    x: &[f64],
    analytic: &[f64],
    indices: impl IntoIterator<Item = usize>,
    step: f64,
    mut loss: impl FnMut(&[f64]) -> (f64, u64),
) -> GradCheckReport {
    let (_, base_region) = loss(x);
    let mut probe = x.to_vec();
    let mut report = GradCheckReport::default();
    for i in indices {
        let orig = probe[i];
        probe[i] = orig + step;
        let (plus, r_plus) = loss(&probe);
        probe[i] = orig - step;
        let (minus, r_minus) = loss(&probe);
        probe[i] = orig;
        if r_plus != base_region || r_minus != base_region {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric, DEFAULT_FLOOR);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((String::new(), i));
        }
    }
    report
}

/// Finite-difference check of network parameter gradients.
///
/// `loss` runs the whole forward computation for the given parameters and
/// returns (loss, branch fingerprint). `coords` chooses which coordinates of
/// each trainable tensor to perturb.
pub fn check_network(
    params: &NetworkParams<f64>,
    analytic: &Gradients<f64>,
    step: f64,
    mut coords: impl FnMut(usize, usize) -> Vec<usize>,
    mut loss: impl FnMut(&NetworkParams<f64>) -> Result<(f64, u64)>,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport::default();
    let mut failure = None;
    for k in 0..TRAINABLE_COUNT {
        let base = params.trainable()[k].data().to_vec();
        let idx = coords(k, base.len());
        let mut scratch = params.clone();
        let mut sub = gradient_check(&base, analytic.tensors[k].data(), idx, step, |x| {
            scratch.trainable_mut()[k].data_mut().copy_from_slice(x);
            match loss(&scratch) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, 0)
                }
            }
        });
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if let Some((_, i)) = sub.worst.take() {
            sub.worst = Some((TRAINABLE_NAMES[k].to_string(), i));
        }
        report.merge(sub);
    }
    Ok(report)
}
