use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub fn sigmoid_forward<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| T::one() / (T::one() + (-x).exp()))
}

/// Uses the cached forward *output* `s`: d/dx = s (1 - s).
pub fn sigmoid_backward<T: Real>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(output, grad_out, "sigmoid")?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::from_vec(output.shape(), data)
}

pub fn relu_forward<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Uses the cached forward input; the gradient at exactly zero is zero.
pub fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(input, grad_out, "relu")?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

fn same_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what} backward: cached {:?} vs grad {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}
