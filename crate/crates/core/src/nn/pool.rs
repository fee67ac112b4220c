//! 2x2 stride-2 max pooling. An odd trailing row or column is dropped.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    /// Flat index into the pooled input for every output element.
    pub argmax: Vec<usize>,
}

pub fn maxpool2x2_forward<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
    let (c, h, w) = input.dims3()?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("max pool needs at least 2x2, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for (o, v) in out.data_mut().iter_mut().enumerate() {
        let (ch, rem) = (o / (oh * ow), o % (oh * ow));
        let (y, xx) = (rem / ow, rem % ow);
        let base = ch * h * w + 2 * y * w + 2 * xx;
        // First maximum in row-major window order wins ties.
        let mut best = base;
        for idx in [base + 1, base + w, base + w + 1] {
            if x[idx] > x[best] {
                best = idx;
            }
        }
        *v = x[best];
        argmax.push(best);
    }
    Ok((
        out,
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward<T: Real>(cache: &PoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::shape(format!(
            "max pool backward: {} gradients for {} outputs",
            grad_out.len(),
            cache.argmax.len()
        )));
    }
    let mut gi = Tensor::zeros(&cache.input_shape);
    let d = gi.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
        d[idx] = d[idx] + g;
    }
    Ok(gi)
}
