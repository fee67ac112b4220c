//! The patch embedding network:
//! conv(6,3x3) -> batchnorm -> sigmoid -> maxpool 2 -> conv(32,3x3) -> relu
//! -> maxpool 2 -> flatten(288) -> fully connected(128).

use rand::Rng;
use rayon::prelude::*;

use super::activation::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
use super::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNorm, BnCache, Mode};
use super::conv::{conv2d_backward, conv2d_forward};
use super::pool::{maxpool2x2_backward, maxpool2x2_forward, PoolCache};
use super::linear::{linear_backward, linear_forward};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub const PATCH_SIZE: usize = 20;
pub const CONV1_CHANNELS: usize = 6;
pub const CONV2_CHANNELS: usize = 32;
pub const KERNEL: usize = 3;
pub const FLAT_DIM: usize = 288;
pub const EMBEDDING_DIM: usize = 128;

/// Number of trainable tensors, in [`NetworkParams::trainable`] order.
pub const TRAINABLE_COUNT: usize = 8;
pub const TRAINABLE_NAMES: [&str; TRAINABLE_COUNT] = [
    "conv1.weight",
    "conv1.bias",
    "bn1.scale",
    "bn1.shift",
    "conv2.weight",
    "conv2.bias",
    "fc.weight",
    "fc.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T = f32> {
    pub conv1_weight: Tensor<T>,
    pub conv1_bias: Tensor<T>,
    pub bn1: BatchNorm<T>,
    pub conv2_weight: Tensor<T>,
    pub conv2_bias: Tensor<T>,
    pub fc_weight: Tensor<T>,
    pub fc_bias: Tensor<T>,
    /// Divide the embedding by its L2 norm. Off by default.
    pub l2_normalize: bool,
}

fn uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

impl<T: Real> NetworkParams<T> {
    /// Uniform +-sqrt(1/fan_in) weights, zero biases, identity batch norm.
    pub fn init(rng: &mut impl Rng) -> Self {
        NetworkParams {
            conv1_weight: uniform(&[CONV1_CHANNELS, 1, KERNEL, KERNEL], KERNEL * KERNEL, rng),
            conv1_bias: Tensor::zeros(&[CONV1_CHANNELS]),
            bn1: BatchNorm::new(CONV1_CHANNELS),
            conv2_weight: uniform(
                &[CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, KERNEL],
                CONV1_CHANNELS * KERNEL * KERNEL,
                rng,
            ),
            conv2_bias: Tensor::zeros(&[CONV2_CHANNELS]),
            fc_weight: uniform(&[EMBEDDING_DIM, FLAT_DIM], FLAT_DIM, rng),
            fc_bias: Tensor::zeros(&[EMBEDDING_DIM]),
            l2_normalize: false,
        }
    }

    pub fn trainable(&self) -> [&Tensor<T>; TRAINABLE_COUNT] {
        [
            &self.conv1_weight,
            &self.conv1_bias,
            &self.bn1.scale,
            &self.bn1.shift,
            &self.conv2_weight,
            &self.conv2_bias,
            &self.fc_weight,
            &self.fc_bias,
        ]
    }

    pub fn trainable_mut(&mut self) -> [&mut Tensor<T>; TRAINABLE_COUNT] {
        [
            &mut self.conv1_weight,
            &mut self.conv1_bias,
            &mut self.bn1.scale,
            &mut self.bn1.shift,
            &mut self.conv2_weight,
            &mut self.conv2_bias,
            &mut self.fc_weight,
            &mut self.fc_bias,
        ]
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            conv1_weight: self.conv1_weight.cast(),
            conv1_bias: self.conv1_bias.cast(),
            bn1: self.bn1.cast(),
            conv2_weight: self.conv2_weight.cast(),
            conv2_bias: self.conv2_bias.cast(),
            fc_weight: self.fc_weight.cast(),
            fc_bias: self.fc_bias.cast(),
            l2_normalize: self.l2_normalize,
        }
    }

    /// Checks every tensor shape and the batch-norm variance invariant.
    pub fn validate(&self) -> Result<()> {
        let expected: [&[usize]; TRAINABLE_COUNT] = [
            &[CONV1_CHANNELS, 1, KERNEL, KERNEL],
            &[CONV1_CHANNELS],
            &[CONV1_CHANNELS],
            &[CONV1_CHANNELS],
            &[CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, KERNEL],
            &[CONV2_CHANNELS],
            &[EMBEDDING_DIM, FLAT_DIM],
            &[EMBEDDING_DIM],
        ];
        for ((t, shape), name) in self.trainable().iter().zip(expected).zip(TRAINABLE_NAMES) {
            if t.shape() != shape {
                return Err(Error::shape(format!("{name}: expected {shape:?}, got {:?}", t.shape())));
            }
        }
        for (t, name) in [(&self.bn1.running_mean, "bn1.running_mean"), (&self.bn1.running_var, "bn1.running_var")] {
            if t.shape() != [CONV1_CHANNELS] {
                return Err(Error::shape(format!("{name}: expected [{CONV1_CHANNELS}], got {:?}", t.shape())));
            }
        }
        if self.bn1.running_var.data().iter().any(|&v| !(v > T::zero())) {
            return Err(Error::invalid("bn1 running variance must be strictly positive"));
        }
        if !(self.bn1.eps > T::zero()) {
            return Err(Error::invalid("bn1 epsilon must be positive"));
        }
        Ok(())
    }
}

/// Gradients shaped like the trainable part of [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub tensors: [Tensor<T>; TRAINABLE_COUNT],
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &NetworkParams<T>) -> Self {
        Gradients {
            tensors: params.trainable().map(|t| t.zeros_like()),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Everything the backward pass needs from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T = f32> {
    pub mode: Mode,
    inputs: Vec<Tensor<T>>,
    bn: BnCache<T>,
    sigmoid_out: Vec<Tensor<T>>,
    pool1: Vec<PoolCache>,
    conv2_in: Vec<Tensor<T>>,
    conv2_out: Vec<Tensor<T>>,
    pool2: Vec<PoolCache>,
    flat: Vec<Tensor<T>>,
    raw_embeddings: Vec<Tensor<T>>,
    /// Output shape of every layer for the first sample, in stack order.
    pub layer_shapes: Vec<Vec<usize>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn batch_len(&self) -> usize {
        self.inputs.len()
    }

    /// Hash of every piecewise-linear branch decision taken in the pass
    /// (ReLU signs and pooling argmaxes). Two passes with the same
    /// fingerprint lie in the same smooth region of the network.
    pub fn branch_fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (pool1, pool2) in self.pool1.iter().zip(&self.pool2) {
            pool1.argmax.hash(&mut h);
            pool2.argmax.hash(&mut h);
        }
        for t in &self.conv2_out {
            for v in t.data() {
                (*v > T::zero()).hash(&mut h);
            }
        }
        h.finish()
    }

    /// Smallest absolute ReLU pre-activation in the batch.
    pub fn min_relu_margin(&self) -> T {
        self.conv2_out
            .iter()
            .flat_map(|t| t.data().iter().map(|v| v.abs()))
            .fold(T::infinity(), T::min)
    }
}

fn check_patch<T: Real>(patch: &Tensor<T>) -> Result<()> {
    if patch.shape() != [1, PATCH_SIZE, PATCH_SIZE] {
        return Err(Error::shape(format!(
            "network input must be (1,{PATCH_SIZE},{PATCH_SIZE}), got {:?}",
            patch.shape()
        )));
    }
    Ok(())
}

fn l2_normalize<T: Real>(e: &Tensor<T>) -> Tensor<T> {
    let norm = e.data().iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm > T::zero() {
        e.map(|v| v / norm)
    } else {
        e.clone()
    }
}

/// Embeds a batch of (1,20,20) patches.
///
/// Training mode normalizes with batch statistics and updates the running
/// statistics in `params.bn1`; inference mode leaves `params` untouched.
pub fn forward_batch<T: Real>(
    params: &mut NetworkParams<T>,
    patches: &[Tensor<T>],
    mode: Mode,
) -> Result<(Vec<Tensor<T>>, ForwardTrace<T>)> {
    patches.iter().try_for_each(check_patch)?;
    let conv1: Vec<Tensor<T>> = patches
        .par_iter()
        .map(|p| conv2d_forward(p, &params.conv1_weight, &params.conv1_bias))
        .collect::<Result<_>>()?;
    let (bn_out, bn_cache) = batchnorm_forward(&conv1, &mut params.bn1, mode)?;
    let p: &NetworkParams<T> = params;

    struct Tail<T> {
        sig: Tensor<T>,
        pool1: PoolCache,
        conv2_in: Tensor<T>,
        conv2_out: Tensor<T>,
        relu_shape: Vec<usize>,
        pool2: PoolCache,
        pool2_shape: Vec<usize>,
        flat: Tensor<T>,
        raw: Tensor<T>,
    }
    let tails: Vec<Tail<T>> = bn_out
        .par_iter()
        .map(|x| -> Result<Tail<T>> {
            let sig = sigmoid_forward(x);
            let (pooled, pool1) = maxpool2x2_forward(&sig)?;
            let conv2_out = conv2d_forward(&pooled, &p.conv2_weight, &p.conv2_bias)?;
            let relu = relu_forward(&conv2_out);
            let (pooled2, pool2) = maxpool2x2_forward(&relu)?;
            let pool2_shape = pooled2.shape().to_vec();
            let flat = pooled2.reshape(&[FLAT_DIM])?;
            let raw = linear_forward(&flat, &p.fc_weight, &p.fc_bias)?;
            Ok(Tail {
                sig,
                pool1,
                conv2_in: pooled,
                relu_shape: relu.shape().to_vec(),
                conv2_out,
                pool2,
                pool2_shape,
                flat,
                raw,
            })
        })
        .collect::<Result<_>>()?;

    let mut layer_shapes = Vec::new();
    if let (Some(c1), Some(b), Some(t)) = (conv1.first(), bn_out.first(), tails.first()) {
        layer_shapes = vec![
            c1.shape().to_vec(),
            b.shape().to_vec(),
            t.sig.shape().to_vec(),
            t.conv2_in.shape().to_vec(),
            t.conv2_out.shape().to_vec(),
            t.relu_shape.clone(),
            t.pool2_shape.clone(),
            t.flat.shape().to_vec(),
            t.raw.shape().to_vec(),
        ];
    }

    let mut trace = ForwardTrace {
        mode,
        inputs: patches.to_vec(),
        bn: bn_cache,
        sigmoid_out: Vec::with_capacity(tails.len()),
        pool1: Vec::with_capacity(tails.len()),
        conv2_in: Vec::with_capacity(tails.len()),
        conv2_out: Vec::with_capacity(tails.len()),
        pool2: Vec::with_capacity(tails.len()),
        flat: Vec::with_capacity(tails.len()),
        raw_embeddings: Vec::with_capacity(tails.len()),
        layer_shapes,
    };
    let mut embeddings = Vec::with_capacity(tails.len());
    for t in tails {
        embeddings.push(if p.l2_normalize { l2_normalize(&t.raw) } else { t.raw.clone() });
        trace.sigmoid_out.push(t.sig);
        trace.pool1.push(t.pool1);
        trace.conv2_in.push(t.conv2_in);
        trace.conv2_out.push(t.conv2_out);
        trace.pool2.push(t.pool2);
        trace.flat.push(t.flat);
        trace.raw_embeddings.push(t.raw);
    }
    Ok((embeddings, trace))
}

/// Inference-mode embedding of one patch. Pure: same inputs, same bits.
pub fn forward<T: Real>(params: &NetworkParams<T>, patch: &Tensor<T>) -> Result<Tensor<T>> {
    check_patch(patch)?;
    let conv1 = conv2d_forward(patch, &params.conv1_weight, &params.conv1_bias)?;
    let mut bn = params.bn1.clone();
    let (mut bn_out, _) = batchnorm_forward(std::slice::from_ref(&conv1), &mut bn, Mode::Inference)?;
    let sig = sigmoid_forward(&bn_out.remove(0));
    let (pooled, _) = maxpool2x2_forward(&sig)?;
    let conv2 = conv2d_forward(&pooled, &params.conv2_weight, &params.conv2_bias)?;
    let (pooled2, _) = maxpool2x2_forward(&relu_forward(&conv2))?;
    let raw = linear_forward(&pooled2.reshape(&[FLAT_DIM])?, &params.fc_weight, &params.fc_bias)?;
    Ok(if params.l2_normalize { l2_normalize(&raw) } else { raw })
}

/// Chain rule through the whole stack; parameter gradients are summed over
/// the batch in sample order.
pub fn backward_batch<T: Real>(
    params: &NetworkParams<T>,
    trace: &ForwardTrace<T>,
    grad_embeddings: &[Tensor<T>],
) -> Result<Gradients<T>> {
    let n = trace.batch_len();
    if grad_embeddings.len() != n {
        return Err(Error::shape(format!(
            "backward got {} embedding gradients for a batch of {n}",
            grad_embeddings.len()
        )));
    }
    if let Some(g) = grad_embeddings.iter().find(|g| g.shape() != [EMBEDDING_DIM]) {
        return Err(Error::shape(format!("embedding gradient shape {:?}", g.shape())));
    }

    // Per-sample tail: fc, pool2, relu, conv2, pool1, sigmoid.
    struct TailGrads<T> {
        fc_w: Tensor<T>,
        fc_b: Tensor<T>,
        conv2_w: Tensor<T>,
        conv2_b: Tensor<T>,
        bn_out: Tensor<T>,
    }
    let tails: Vec<TailGrads<T>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<TailGrads<T>> {
            let g_raw = if params.l2_normalize {
                let e = &trace.raw_embeddings[i];
                let norm = e.data().iter().map(|&v| v * v).sum::<T>().sqrt();
                if norm > T::zero() {
                    let g = &grad_embeddings[i];
                    let dot = e.data().iter().zip(g.data()).map(|(&a, &b)| a * b).sum::<T>() / norm;
                    let data = e
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&ev, &gv)| (gv - ev / norm * dot) / norm)
                        .collect();
                    Tensor::from_vec(&[EMBEDDING_DIM], data)?
                } else {
                    grad_embeddings[i].clone()
                }
            } else {
                grad_embeddings[i].clone()
            };
            let fc = linear_backward(&trace.flat[i], &params.fc_weight, &g_raw)?;
            let g_pool2 = fc.input.reshape(&[CONV2_CHANNELS, 3, 3])?;
            let g_relu = maxpool2x2_backward(&trace.pool2[i], &g_pool2)?;
            let g_conv2 = relu_backward(&trace.conv2_out[i], &g_relu)?;
            let conv2 = conv2d_backward(&trace.conv2_in[i], &params.conv2_weight, &g_conv2)?;
            let g_sig = maxpool2x2_backward(&trace.pool1[i], &conv2.input)?;
            let g_bn = sigmoid_backward(&trace.sigmoid_out[i], &g_sig)?;
            Ok(TailGrads {
                fc_w: fc.weights,
                fc_b: fc.bias,
                conv2_w: conv2.weights,
                conv2_b: conv2.bias,
                bn_out: g_bn,
            })
        })
        .collect::<Result<_>>()?;

    let g_bn_out: Vec<Tensor<T>> = tails.iter().map(|t| t.bn_out.clone()).collect();
    let bn = batchnorm_backward(&trace.bn, &params.bn1, &g_bn_out)?;
    let conv1: Vec<_> = trace
        .inputs
        .par_iter()
        .zip(bn.inputs.par_iter())
        .map(|(x, g)| conv2d_backward(x, &params.conv1_weight, g))
        .collect::<Result<_>>()?;

    let mut grads = Gradients::zeros_like(params);
    grads.tensors[2] = bn.scale;
    grads.tensors[3] = bn.shift;
    for (c1, tail) in conv1.iter().zip(&tails) {
        grads.tensors[0].add_assign(&c1.weights)?;
        grads.tensors[1].add_assign(&c1.bias)?;
        grads.tensors[4].add_assign(&tail.conv2_w)?;
        grads.tensors[5].add_assign(&tail.conv2_b)?;
        grads.tensors[6].add_assign(&tail.fc_w)?;
        grads.tensors[7].add_assign(&tail.fc_b)?;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_patch(rng: &mut ChaCha8Rng) -> Tensor<f32> {
        Tensor::from_vec(
            &[1, 20, 20],
            (0..400).map(|_| rng.random_range(-2.0f32..2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn layer_shapes_follow_the_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = NetworkParams::<f32>::init(&mut rng);
        let patches = vec![random_patch(&mut rng), random_patch(&mut rng)];
        let (emb, trace) = forward_batch(&mut params, &patches, Mode::Training).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![6, 18, 18],
            vec![6, 18, 18],
            vec![6, 18, 18],
            vec![6, 9, 9],
            vec![32, 7, 7],
            vec![32, 7, 7],
            vec![32, 3, 3],
            vec![288],
            vec![128],
        ];
        assert_eq!(trace.layer_shapes, expected);
        assert_eq!(emb[0].shape(), &[128]);
    }

    #[test]
    fn inference_is_deterministic_and_matches_batched_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = NetworkParams::<f32>::init(&mut rng);
        let p = random_patch(&mut rng);
        let a = forward(&params, &p).unwrap();
        let b = forward(&params, &p).unwrap();
        assert_eq!(a, b);
        let before = params.clone();
        let (batched, _) = forward_batch(&mut params, std::slice::from_ref(&p), Mode::Inference).unwrap();
        assert_eq!(params, before);
        assert_eq!(batched[0], a);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = NetworkParams::<f32>::init(&mut rng);
        assert!(matches!(forward(&params, &Tensor::zeros(&[1, 19, 20])), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_embedding_gradient_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = NetworkParams::<f32>::init(&mut rng);
        let patches: Vec<_> = (0..3).map(|_| random_patch(&mut rng)).collect();
        let (_, trace) = forward_batch(&mut params, &patches, Mode::Training).unwrap();
        let zeros = vec![Tensor::zeros(&[128]); 3];
        let g = backward_batch(&params, &trace, &zeros).unwrap();
        assert!(g.tensors.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn inference_gradients_accumulate_over_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = NetworkParams::<f64>::init(&mut rng);
        let patches: Vec<Tensor<f64>> = (0..3).map(|_| random_patch(&mut rng).cast()).collect();
        let grads: Vec<Tensor<f64>> = (0..3)
            .map(|_| Tensor::from_vec(&[128], (0..128).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let (_, trace) = forward_batch(&mut params, &patches, Mode::Inference).unwrap();
        let whole = backward_batch(&params, &trace, &grads).unwrap();
        let mut summed = Gradients::zeros_like(&params);
        for (p, g) in patches.iter().zip(&grads) {
            let (_, t) = forward_batch(&mut params, std::slice::from_ref(p), Mode::Inference).unwrap();
            summed.add_assign(&backward_batch(&params, &t, std::slice::from_ref(g)).unwrap()).unwrap();
        }
        for (a, b) in whole.tensors.iter().zip(&summed.tensors) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn validate_rejects_bad_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = NetworkParams::<f32>::init(&mut rng);
        assert!(params.validate().is_ok());
        params.bn1.running_var.data_mut()[0] = 0.0;
        assert!(params.validate().is_err());
    }
}
