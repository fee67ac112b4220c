//! `min_x 0.5 * |D x - y|^2 + lambda * |x|_1` by cyclic coordinate descent.

use super::dictionary::{axpy, dot, norm, Dictionary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Stop once no coordinate moves by more than this in a full sweep.
    pub tol: f64,
    /// Cap on full sweeps over all coordinates.
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { lambda: 0.1, tol: 1e-7, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub x: Vec<f64>,
    /// `y - D x`.
    pub residual: Vec<f64>,
    pub lambda: f64,
    /// Full sweeps taken.
    pub iterations: usize,
    pub converged: bool,
    /// Objective before the first sweep and after every update of the
    /// iterate: full sweeps, support-only sweeps and exact support solves.
    pub objective_trace: Vec<f64>,
}

impl SparseCode {
    pub fn residual_norm(&self) -> f64 {
        norm(&self.residual)
    }
}

const SUPPORT_PASSES: usize = 100;

/// Exact minimizer over the coordinates in `support` with their current
/// signs held fixed: `G z = D_S^T y - lambda * sign(x_S)`. `None` when the
/// Gram matrix is numerically singular or a coefficient would change sign.
fn support_solution(dict: &Dictionary, y: &[f64], x: &[f64], support: &[usize], lambda: f64) -> Option<Vec<f64>> {
    let k = support.len();
    if k == 0 {
        return None;
    }
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..=a {
            let g = dot(dict.atom(support[a]), dict.atom(support[b]));
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
    }
    let rhs: Vec<f64> = support.iter().map(|&j| dot(dict.atom(j), y) - lambda * x[j].signum()).collect();
    let z = cholesky_solve(&mut gram, k, &rhs)?;
    let consistent = support.iter().zip(&z).all(|(&j, &v)| v.is_finite() && v * x[j] > 0.0);
    consistent.then_some(z)
}

/// Solves `A z = b` for symmetric positive definite `A` (row-major, k x k,
/// overwritten by its Cholesky factor).
fn cholesky_solve(a: &mut [f64], k: usize, b: &[f64]) -> Option<Vec<f64>> {
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            if i == j {
                if s <= 1e-10 {
                    return None;
                }
                a[i * k + i] = s.sqrt();
            } else {
                a[i * k + j] = s / a[j * k + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..k {
        for p in 0..i {
            z[i] -= a[i * k + p] * z[p];
        }
        z[i] /= a[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            z[i] -= a[p * k + i] * z[p];
        }
        z[i] /= a[i * k + i];
    }
    Some(z)
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

pub fn objective(residual: &[f64], x: &[f64], lambda: f64) -> f64 {
    0.5 * dot(residual, residual) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Atoms must have unit norm (or be zero, in which case their coefficient
/// stays 0), so each coordinate update is a closed-form soft threshold.
///
/// Between full sweeps the current support is settled, exactly when the
/// sign-constrained least-squares step keeps every sign, otherwise by a
/// bounded number of sweeps over the support alone. Convergence is only
/// declared by a full sweep.
pub fn lasso_solve(dict: &Dictionary, y: &[f64], config: &LassoConfig) -> Result<SparseCode> {
    if y.len() != dict.dim {
        return Err(Error::shape(format!("query of length {} for a {}-d dictionary", y.len(), dict.dim)));
    }
    if !(config.lambda >= 0.0) || !config.lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", config.lambda)));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("query vector".into()));
    }
    let n = dict.len();
    let live: Vec<usize> = (0..n).filter(|&j| dict.atom(j).iter().any(|&v| v != 0.0)).collect();
    let mut x = vec![0.0; n];
    let mut residual = y.to_vec();
    let mut trace = vec![objective(&residual, &x, config.lambda)];
    let mut iterations = 0;
    let mut converged = false;
    let sweep = |coords: &[usize], x: &mut [f64], residual: &mut [f64]| -> f64 {
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let atom = dict.atom(j);
            let old = x[j];
            let new = soft_threshold(old + dot(atom, residual), config.lambda);
            let delta = new - old;
            if delta != 0.0 {
                axpy(residual, -delta, atom);
                x[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };
    // A pass that raises the objective is undone; in exact arithmetic it
    // could not have, so what it moved was rounding noise.
    let guarded = |coords: &[usize], x: &mut Vec<f64>, residual: &mut Vec<f64>, trace: &mut Vec<f64>| -> Option<f64> {
        let before = *trace.last().expect("trace starts non-empty");
        let (saved_x, saved_r) = (x.clone(), residual.clone());
        let change = sweep(coords, x, residual);
        let after = objective(residual, x, config.lambda);
        if after > before {
            *x = saved_x;
            *residual = saved_r;
            return None;
        }
        trace.push(after);
        Some(change)
    };
    while iterations < config.max_iter {
        iterations += 1;
        match guarded(&live, &mut x, &mut residual, &mut trace) {
            Some(change) if change >= config.tol => {}
            _ => {
                converged = true;
                break;
            }
        }
        // settle the current support before the next full sweep
        let active: Vec<usize> = live.iter().copied().filter(|&j| x[j] != 0.0).collect();
        if let Some(z) = support_solution(dict, y, &x, &active, config.lambda) {
            let before = *trace.last().expect("trace starts non-empty");
            let mut candidate = x.clone();
            active.iter().zip(&z).for_each(|(&j, &v)| candidate[j] = v);
            let recon = dict.reconstruct(&candidate);
            let r: Vec<f64> = y.iter().zip(&recon).map(|(a, b)| a - b).collect();
            let after = objective(&r, &candidate, config.lambda);
            if after <= before {
                x = candidate;
                residual = r;
                trace.push(after);
                continue;
            }
        }
        for _ in 0..SUPPORT_PASSES {
            match guarded(&active, &mut x, &mut residual, &mut trace) {
                Some(change) if change >= config.tol => {}
                _ => break,
            }
        }
    }
    // drift from incremental updates is removed before anyone reads it
    let recon = dict.reconstruct(&x);
    residual.iter_mut().zip(y.iter().zip(&recon)).for_each(|(r, (yi, di))| *r = yi - di);
    Ok(SparseCode { x, residual, lambda: config.lambda, iterations, converged, objective_trace: trace })
}

/// Largest violation of the LASSO optimality conditions.
pub fn kkt_violation(dict: &Dictionary, y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let recon = dict.reconstruct(x);
    let r: Vec<f64> = y.iter().zip(&recon).map(|(a, b)| a - b).collect();
    (0..dict.len())
        .map(|j| {
            let g = dot(dict.atom(j), &r);
            if x[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * x[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}
