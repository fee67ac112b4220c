//! Per-channel batch normalization over a batch of (C, H, W) tensors.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Training,
    /// Running statistics; parameters are not touched.
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: T,
    /// Weight of the newest batch in the running-statistics average.
    pub momentum: T,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            scale: Tensor::filled(&[channels], T::one()),
            shift: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            eps: T::lit(DEFAULT_EPS),
            momentum: T::lit(DEFAULT_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn cast<U: Real>(&self) -> BatchNorm<U> {
        BatchNorm {
            scale: self.scale.cast(),
            shift: self.shift.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            eps: U::from_f64(self.eps.to_f64().unwrap_or(DEFAULT_EPS)).unwrap_or_else(U::nan),
            momentum: U::from_f64(self.momentum.to_f64().unwrap_or(DEFAULT_MOMENTUM)).unwrap_or_else(U::nan),
        }
    }
}

/// Values cached by the forward pass for [`batchnorm_backward`].
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub mode: Mode,
    pub normalized: Vec<Tensor<T>>,
    pub inv_std: Vec<T>,
    /// Batch statistics in training mode, running statistics otherwise.
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BnGrads<T> {
    pub inputs: Vec<Tensor<T>>,
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
}

fn check_batch<T: Real>(inputs: &[Tensor<T>], channels: usize) -> Result<(usize, usize)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::invalid("batch norm on an empty batch"))?;
    let (c, h, w) = first.dims3()?;
    if c != channels {
        return Err(Error::shape(format!(
            "batch norm has {channels} channels, input has {c}"
        )));
    }
    if let Some(bad) = inputs.iter().find(|t| t.shape() != first.shape()) {
        return Err(Error::shape(format!(
            "batch mixes shapes {:?} and {:?}",
            first.shape(),
            bad.shape()
        )));
    }
    Ok((c, h * w))
}

pub fn batchnorm_forward<T: Real>(
    inputs: &[Tensor<T>],
    bn: &mut BatchNorm<T>,
    mode: Mode,
) -> Result<(Vec<Tensor<T>>, BnCache<T>)> {
    let (channels, plane) = check_batch(inputs, bn.channels())?;
    if mode == Mode::Training && inputs.len() < 2 {
        return Err(Error::invalid(format!(
            "training-mode batch norm needs a batch of at least 2, got {}",
            inputs.len()
        )));
    }
    let (mean, var) = match mode {
        Mode::Training => {
            let count = T::from_usize(inputs.len() * plane).unwrap();
            let mut mean = vec![T::zero(); channels];
            let mut var = vec![T::zero(); channels];
            for c in 0..channels {
                let s: T = inputs
                    .iter()
                    .map(|t| t.data()[c * plane..(c + 1) * plane].iter().copied().sum::<T>())
                    .sum();
                let m = s / count;
                let ss: T = inputs
                    .iter()
                    .map(|t| {
                        t.data()[c * plane..(c + 1) * plane]
                            .iter()
                            .map(|&v| (v - m) * (v - m))
                            .sum::<T>()
                    })
                    .sum();
                mean[c] = m;
                var[c] = ss / count;
                let unbiased = ss / (count - T::one());
                let rm = &mut bn.running_mean.data_mut()[c];
                *rm = (T::one() - bn.momentum) * *rm + bn.momentum * m;
                let rv = &mut bn.running_var.data_mut()[c];
                *rv = (T::one() - bn.momentum) * *rv + bn.momentum * unbiased;
            }
            (mean, var)
        }
        Mode::Inference => (bn.running_mean.data().to_vec(), bn.running_var.data().to_vec()),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + bn.eps).sqrt()).collect();
    let mut normalized = Vec::with_capacity(inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for t in inputs {
        let mut xhat = t.clone();
        let mut y = t.zeros_like();
        for c in 0..channels {
            let (m, is, g, b) = (mean[c], inv_std[c], bn.scale.data()[c], bn.shift.data()[c]);
            let xs = &mut xhat.data_mut()[c * plane..(c + 1) * plane];
            let ys = &mut y.data_mut()[c * plane..(c + 1) * plane];
            for (xv, yv) in xs.iter_mut().zip(ys.iter_mut()) {
                *xv = (*xv - m) * is;
                *yv = g * *xv + b;
            }
        }
        normalized.push(xhat);
        outputs.push(y);
    }
    Ok((
        outputs,
        BnCache {
            mode,
            normalized,
            inv_std,
            mean,
            var,
        },
    ))
}

pub fn batchnorm_backward<T: Real>(
    cache: &BnCache<T>,
    bn: &BatchNorm<T>,
    grad_out: &[Tensor<T>],
) -> Result<BnGrads<T>> {
    if grad_out.len() != cache.normalized.len() {
        return Err(Error::shape(format!(
            "batch norm backward got {} gradients for a batch of {}",
            grad_out.len(),
            cache.normalized.len()
        )));
    }
    let (channels, plane) = check_batch(&cache.normalized, bn.channels())?;
    if let Some(bad) = grad_out.iter().find(|g| g.shape() != cache.normalized[0].shape()) {
        return Err(Error::shape(format!("batch norm grad shape {:?}", bad.shape())));
    }
    let count = T::from_usize(grad_out.len() * plane).unwrap();
    let mut g_scale = Tensor::zeros(&[channels]);
    let mut g_shift = Tensor::zeros(&[channels]);
    let mut inputs: Vec<Tensor<T>> = grad_out.iter().map(|g| g.zeros_like()).collect();
    for c in 0..channels {
        let range = c * plane..(c + 1) * plane;
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for (g, xh) in grad_out.iter().zip(&cache.normalized) {
            for (&dy, &x) in g.data()[range.clone()].iter().zip(&xh.data()[range.clone()]) {
                sum_dy = sum_dy + dy;
                sum_dy_xhat = sum_dy_xhat + dy * x;
            }
        }
        g_shift.data_mut()[c] = sum_dy;
        g_scale.data_mut()[c] = sum_dy_xhat;
        let gamma = bn.scale.data()[c];
        let is = cache.inv_std[c];
        for ((dx, g), xh) in inputs.iter_mut().zip(grad_out).zip(&cache.normalized) {
            let dxs = &mut dx.data_mut()[range.clone()];
            let dys = &g.data()[range.clone()];
            let xs = &xh.data()[range.clone()];
            match cache.mode {
                Mode::Training => {
                    for ((d, &dy), &x) in dxs.iter_mut().zip(dys).zip(xs) {
                        *d = gamma * is / count * (count * dy - sum_dy - x * sum_dy_xhat);
                    }
                }
                Mode::Inference => {
                    for (d, &dy) in dxs.iter_mut().zip(dys) {
                        *d = gamma * is * dy;
                    }
                }
            }
        }
    }
    Ok(BnGrads {
        inputs,
        scale: g_scale,
        shift: g_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
        (0..n)
            .map(|_| {
                Tensor::from_vec(&[2, 3, 3], (0..18).map(|_| rng.random_range(-3.0..5.0)).collect()).unwrap()
            })
            .collect()
    }

    #[test]
    fn training_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = batch(4, &mut rng);
        let mut bn = BatchNorm::<f64>::new(2);
        let (ys, _) = batchnorm_forward(&xs, &mut bn, Mode::Training).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = ys.iter().flat_map(|t| t.data()[c * 9..(c + 1) * 9].to_vec()).collect();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!(m.abs() < 1e-9);
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn training_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = batch(3, &mut rng);
        let mut bn = BatchNorm::<f64>::new(2);
        bn.scale = Tensor::from_vec(&[2], vec![1.5, -0.5]).unwrap();
        bn.shift = Tensor::from_vec(&[2], vec![0.25, 2.0]).unwrap();
        let (ys, _) = batchnorm_forward(&xs, &mut bn, Mode::Training).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = xs.iter().flat_map(|t| t.data()[c * 9..(c + 1) * 9].to_vec()).collect();
            let n = vals.len() as f64;
            let mut m = 0.0;
            for v in &vals {
                m += v;
            }
            m /= n;
            let mut var = 0.0;
            for v in &vals {
                var += (v - m) * (v - m);
            }
            var /= n;
            for (b, t) in xs.iter().enumerate() {
                for i in 0..9 {
                    let expect = bn.scale.data()[c] * (t.data()[c * 9 + i] - m) / (var + 1e-5).sqrt()
                        + bn.shift.data()[c];
                    assert!((ys[b].data()[c * 9 + i] - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn inference_with_unit_stats_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = batch(1, &mut rng);
        let mut bn = BatchNorm::<f64>::new(2);
        let before = bn.clone();
        let (ys, _) = batchnorm_forward(&xs, &mut bn, Mode::Inference).unwrap();
        for (a, b) in xs[0].data().iter().zip(ys[0].data()) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(bn, before);
    }

    #[test]
    fn running_stats_move_towards_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = batch(5, &mut rng);
        let mut bn = BatchNorm::<f64>::new(2);
        let (_, cache) = batchnorm_forward(&xs, &mut bn, Mode::Training).unwrap();
        let expect = 0.1 * cache.mean[0];
        assert!((bn.running_mean.data()[0] - expect).abs() < 1e-12);
        assert!(bn.running_var.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn training_needs_two_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = batch(1, &mut rng);
        let mut bn = BatchNorm::<f64>::new(2);
        assert!(matches!(
            batchnorm_forward(&xs, &mut bn, Mode::Training),
            Err(Error::InvalidArgument(_))
        ));
    }
}
