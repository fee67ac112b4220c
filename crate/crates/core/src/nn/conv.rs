//! Valid (unpadded) stride-1 2-D cross-correlation.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Gradients of one convolution call.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check_shapes<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (c_in, h, w) = input.dims3()?;
    let (c_out, wc, kh, kw) = match weights.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::shape(format!("conv weights must be rank 4, got {:?}", weights.shape()))),
    };
    if kh != kw {
        return Err(Error::shape(format!("conv kernel must be square, got {kh}x{kw}")));
    }
    if wc != c_in {
        return Err(Error::shape(format!(
            "conv input has {c_in} channels but weights expect {wc}"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::shape(format!(
            "conv bias shape {:?} does not match {c_out} output channels",
            bias.shape()
        )));
    }
    if h < kh || w < kw {
        return Err(Error::shape(format!(
            "conv input {h}x{w} smaller than kernel {kh}x{kw}"
        )));
    }
    Ok((c_in, h, w, c_out, kh))
}

/// `out[o,y,x] = bias[o] + sum_{c,i,j} input[c,y+i,x+j] * weights[o,c,i,j]`.
pub fn conv2d_forward<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (c_in, h, w, c_out, k) = check_shapes(input, weights, bias)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let x = input.data();
    let wt = weights.data();
    let mut out = Tensor::zeros(&[c_out, oh, ow]);
    let o = out.data_mut();
    for co in 0..c_out {
        let plane = &mut o[co * oh * ow..(co + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = bias.data()[co]);
        for ci in 0..c_in {
            let src = &x[ci * h * w..(ci + 1) * h * w];
            let kern = &wt[(co * c_in + ci) * k * k..(co * c_in + ci + 1) * k * k];
            for i in 0..k {
                for j in 0..k {
                    let kv = kern[i * k + j];
                    for y in 0..oh {
                        let row = &src[(y + i) * w + j..(y + i) * w + j + ow];
                        let dst = &mut plane[y * ow..(y + 1) * ow];
                        for (d, &s) in dst.iter_mut().zip(row) {
                            *d = *d + kv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`conv2d_forward`]; `input` is the cached forward input.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let c_out = weights.shape().first().copied().unwrap_or(0);
    let bias_stub = Tensor::zeros(&[c_out]);
    let (c_in, h, w, c_out, k) = check_shapes(input, weights, &bias_stub)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    if grad_out.shape() != [c_out, oh, ow] {
        return Err(Error::shape(format!(
            "conv grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            [c_out, oh, ow]
        )));
    }
    let x = input.data();
    let wt = weights.data();
    let g = grad_out.data();
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = Tensor::zeros(&[c_out]);
    {
        let gi = gi.data_mut();
        let gw = gw.data_mut();
        let gb = gb.data_mut();
        for co in 0..c_out {
            let gplane = &g[co * oh * ow..(co + 1) * oh * ow];
            gb[co] = gplane.iter().copied().sum();
            for ci in 0..c_in {
                let src = &x[ci * h * w..(ci + 1) * h * w];
                let dsrc = &mut gi[ci * h * w..(ci + 1) * h * w];
                let base = (co * c_in + ci) * k * k;
                for i in 0..k {
                    for j in 0..k {
                        let kv = wt[base + i * k + j];
                        let mut acc = T::zero();
                        for y in 0..oh {
                            let off = (y + i) * w + j;
                            let grow = &gplane[y * ow..(y + 1) * ow];
                            for (xx, &gv) in grow.iter().enumerate() {
                                acc = acc + gv * src[off + xx];
                                dsrc[off + xx] = dsrc[off + xx] + gv * kv;
                            }
                        }
                        gw[base + i * k + j] = acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn patch_shape_shrinks_by_two() {
        let input = Tensor::<f32>::zeros(&[1, 20, 20]);
        let out = conv2d_forward(&input, &Tensor::zeros(&[6, 1, 3, 3]), &Tensor::zeros(&[6])).unwrap();
        assert_eq!(out.shape(), &[6, 18, 18]);
    }

    #[test]
    fn ones_sum_to_nine() {
        let input = Tensor::<f32>::filled(&[1, 3, 3], 1.0);
        let out = conv2d_forward(&input, &Tensor::filled(&[1, 1, 3, 3], 1.0), &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[9.0]);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = random(&[1, 5, 5], &mut rng);
        let weights = random(&[2, 1, 3, 3], &mut rng);
        let bias = random(&[2], &mut rng);
        let out = conv2d_forward(&input, &weights, &bias).unwrap();
        for o in 0..2 {
            for y in 0..3 {
                for x in 0..3 {
                    let mut dot = bias.data()[o];
                    for i in 0..3 {
                        for j in 0..3 {
                            dot += input.data()[(y + i) * 5 + x + j] * weights.data()[o * 9 + i * 3 + j];
                        }
                    }
                    assert!((out.data()[o * 9 + y * 3 + x] - dot).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let input = Tensor::<f32>::zeros(&[2, 5, 5]);
        let err = conv2d_forward(&input, &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1])).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn zero_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input = random(&[2, 6, 6], &mut rng);
        let weights = random(&[3, 2, 3, 3], &mut rng);
        let g = conv2d_backward(&input, &weights, &Tensor::zeros(&[3, 4, 4])).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_grad_picks_input_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random(&[1, 6, 6], &mut rng);
        let weights = random(&[1, 1, 3, 3], &mut rng);
        let mut grad_out = Tensor::zeros(&[1, 4, 4]);
        grad_out.data_mut()[2 * 4 + 1] = 1.0;
        let g = conv2d_backward(&input, &weights, &grad_out).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.weights.data()[i * 3 + j], input.data()[(2 + i) * 6 + 1 + j]);
            }
        }
        assert_eq!(g.bias.data(), &[1.0]);
    }
}
