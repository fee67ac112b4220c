use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Gradients of a fully connected layer.
#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T: Real>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    match *weights.shape() {
        [out, inp] if inp == input.len() => Ok((out, inp)),
        _ => Err(Error::shape(format!(
            "linear weights {:?} do not accept an input of {} values",
            weights.shape(),
            input.len()
        ))),
    }
}

/// `W x + b` for `W` of shape (out, in); `x` is read flat.
pub fn linear_forward<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (out, inp) = check(input, weights)?;
    if bias.len() != out {
        return Err(Error::shape(format!("linear bias of {} for {out} outputs", bias.len())));
    }
    let x = input.data();
    let data = weights
        .data()
        .chunks_exact(inp)
        .zip(bias.data())
        .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
        .collect();
    Tensor::from_vec(&[out], data)
}

pub fn linear_backward<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LinearGrads<T>> {
    let (out, inp) = check(input, weights)?;
    if grad_out.len() != out {
        return Err(Error::shape(format!("linear output gradient of {} for {out} outputs", grad_out.len())));
    }
    let x = input.data();
    let mut g_w = Tensor::zeros(&[out, inp]);
    let mut g_x = vec![T::zero(); inp];
    for (o, (&g, row_w)) in grad_out.data().iter().zip(weights.data().chunks_exact(inp)).enumerate() {
        let row = &mut g_w.data_mut()[o * inp..(o + 1) * inp];
        for ((gw, &xv), (gx, &w)) in row.iter_mut().zip(x).zip(g_x.iter_mut().zip(row_w)) {
            *gw = g * xv;
            *gx = *gx + g * w;
        }
    }
    Ok(LinearGrads {
        input: Tensor::from_vec(input.shape(), g_x)?,
        weights: g_w,
        bias: Tensor::from_vec(&[out], grad_out.data().to_vec())?,
    })
}
