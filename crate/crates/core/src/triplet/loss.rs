//! Triplet loss with online valid-triplet selection.
//!
//! For embeddings `a`, `p`, `n` the per-triplet term is
//! `|a - p|^2 - |a - n|^2 + margin`. A triplet is valid when the term is
//! strictly positive; invalid triplets add nothing to the loss or gradient.

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletTerm<T> {
    pub term: T,
    pub valid: bool,
}

impl<T: Real> TripletTerm<T> {
    /// Contribution to the batch loss.
    pub fn loss(&self) -> T {
        if self.valid {
            self.term
        } else {
            T::zero()
        }
    }
}

fn check<T: Real>(a: &Tensor<T>, p: &Tensor<T>, n: &Tensor<T>) -> Result<()> {
    if a.shape() != p.shape() || a.shape() != n.shape() || a.shape().len() != 1 {
        return Err(Error::shape(format!(
            "triplet embeddings must be equal-length vectors, got {:?} {:?} {:?}",
            a.shape(),
            p.shape(),
            n.shape()
        )));
    }
    Ok(())
}

fn squared_distance<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

pub fn triplet_loss<T: Real>(a: &Tensor<T>, p: &Tensor<T>, n: &Tensor<T>, margin: T) -> Result<TripletTerm<T>> {
    check(a, p, n)?;
    let term = squared_distance(a.data(), p.data()) - squared_distance(a.data(), n.data()) + margin;
    Ok(TripletTerm {
        term,
        valid: term > T::zero(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrads<T> {
    pub anchor: Tensor<T>,
    pub positive: Tensor<T>,
    pub negative: Tensor<T>,
}

/// Gradients of the selected term: `g_a = 2(n - p)`, `g_p = -2(a - p)`,
/// `g_n = 2(a - n)`, or all zeros for an invalid triplet.
pub fn triplet_loss_gradients<T: Real>(
    a: &Tensor<T>,
    p: &Tensor<T>,
    n: &Tensor<T>,
    margin: T,
) -> Result<(TripletTerm<T>, TripletGrads<T>)> {
    let term = triplet_loss(a, p, n, margin)?;
    if !term.valid {
        return Ok((
            term,
            TripletGrads {
                anchor: a.zeros_like(),
                positive: a.zeros_like(),
                negative: a.zeros_like(),
            },
        ));
    }
    let two = T::lit(2.0);
    let zip3 = |f: &dyn Fn(T, T, T) -> T| -> Tensor<T> {
        let data = a
            .data()
            .iter()
            .zip(p.data())
            .zip(n.data())
            .map(|((&x, &y), &z)| f(x, y, z))
            .collect();
        Tensor::from_vec(a.shape(), data).expect("same shape")
    };
    Ok((
        term,
        TripletGrads {
            anchor: zip3(&|_, pv, nv| two * (nv - pv)),
            positive: zip3(&|av, pv, _| -two * (av - pv)),
            negative: zip3(&|av, _, nv| two * (av - nv)),
        },
    ))
}

/// Batch loss over `(anchor, positive, negative)` embedding slices: the sum
/// of valid terms, the number of valid triplets, and per-embedding gradients
/// laid out like the inputs.
pub fn batch_triplet_loss<T: Real>(
    anchors: &[Tensor<T>],
    positives: &[Tensor<T>],
    negatives: &[Tensor<T>],
    margin: T,
) -> Result<(T, usize, [Vec<Tensor<T>>; 3])> {
    if anchors.len() != positives.len() || anchors.len() != negatives.len() {
        return Err(Error::shape("triplet batch slices differ in length"));
    }
    let mut total = T::zero();
    let mut valid = 0;
    let mut grads: [Vec<Tensor<T>>; 3] = Default::default();
    for ((a, p), n) in anchors.iter().zip(positives).zip(negatives) {
        let (term, g) = triplet_loss_gradients(a, p, n, margin)?;
        total = total + term.loss();
        valid += usize::from(term.valid);
        grads[0].push(g.anchor);
        grads[1].push(g.positive);
        grads[2].push(g.negative);
    }
    Ok((total, valid, grads))
}
