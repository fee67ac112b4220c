//! SGD with momentum and L2 weight decay folded into the gradient.

use super::network::{Gradients, NetworkParams, TRAINABLE_COUNT};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
}

/// Momentum buffers mirroring the trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub velocity: [Tensor<T>; TRAINABLE_COUNT],
    pub step: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        OptimizerState {
            velocity: params.trainable().map(|t| t.zeros_like()),
            step: 0,
        }
    }
}

impl Sgd {
    /// `v <- momentum * v + (g + decay * w); w <- w - lr * v`.
    pub fn step<T: Real>(
        &self,
        params: &mut NetworkParams<T>,
        grads: &Gradients<T>,
        state: &mut OptimizerState<T>,
    ) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to sgd step".into()));
        }
        let lr = T::lit(self.learning_rate as f64);
        let mu = T::lit(self.momentum as f64);
        let decay = T::lit(self.weight_decay as f64);
        for ((w, g), v) in params
            .trainable_mut()
            .into_iter()
            .zip(&grads.tensors)
            .zip(state.velocity.iter_mut())
        {
            if w.shape() != g.shape() || w.shape() != v.shape() {
                return Err(Error::shape(format!(
                    "sgd: param {:?}, grad {:?}, velocity {:?}",
                    w.shape(),
                    g.shape(),
                    v.shape()
                )));
            }
            for ((wv, &gv), vv) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                *vv = mu * *vv + (gv + decay * *wv);
                *wv = *wv - lr * *vv;
            }
        }
        state.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (NetworkParams<f64>, Gradients<f64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NetworkParams::<f64>::init(&mut rng);
        let mut grads = Gradients::zeros_like(&params);
        for t in grads.tensors.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        (params, grads, rng)
    }

    #[test]
    fn vanilla_sgd_without_momentum_or_decay() {
        let (mut params, grads, _) = setup(1);
        let before = params.clone();
        let sgd = Sgd { learning_rate: 0.5, momentum: 0.0, weight_decay: 0.0 };
        let mut state = OptimizerState::new(&params);
        sgd.step(&mut params, &grads, &mut state).unwrap();
        for ((a, b), g) in params.trainable().iter().zip(before.trainable()).zip(&grads.tensors) {
            for ((&w1, &w0), &gv) in a.data().iter().zip(b.data()).zip(g.data()) {
                assert_eq!(w1, w0 - 0.5 * gv);
            }
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (mut params, _, _) = setup(2);
        let before = params.clone();
        let grads = Gradients::zeros_like(&params);
        let sgd = Sgd { learning_rate: 0.1, momentum: 0.9, weight_decay: 0.0 };
        let mut state = OptimizerState::new(&params);
        sgd.step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let (mut params, grads1, mut rng) = setup(3);
        let mut grads2 = grads1.clone();
        for t in grads2.tensors.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let w0 = params.clone();
        let (lr, mu, wd) = (0.01f64, 0.9f64, 0.0005f64);
        let sgd = Sgd { learning_rate: lr as f32, momentum: mu as f32, weight_decay: wd as f32 };
        let (lr, mu, wd) = (lr as f32 as f64, mu as f32 as f64, wd as f32 as f64);
        let mut state = OptimizerState::new(&params);
        sgd.step(&mut params, &grads1, &mut state).unwrap();
        sgd.step(&mut params, &grads2, &mut state).unwrap();
        for k in 0..TRAINABLE_COUNT {
            for i in 0..w0.trainable()[k].len() {
                let w = w0.trainable()[k].data()[i];
                let v1 = grads1.tensors[k].data()[i] + wd * w;
                let w1 = w - lr * v1;
                let v2 = mu * v1 + grads2.tensors[k].data()[i] + wd * w1;
                let w2 = w1 - lr * v2;
                assert!((params.trainable()[k].data()[i] - w2).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let (mut params, mut grads, _) = setup(4);
        grads.tensors[3].data_mut()[0] = f64::NAN;
        let sgd = Sgd { learning_rate: 0.1, momentum: 0.0, weight_decay: 0.0 };
        let mut state = OptimizerState::new(&params);
        assert!(matches!(sgd.step(&mut params, &grads, &mut state), Err(Error::NonFinite(_))));
    }
}
