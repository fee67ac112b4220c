//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "PFNN" | version: u8 | tensor count: u32 |
//! per tensor: rank: u32 | dims: u32 * rank | payload: f32 * prod(dims)
//! ```
//!
//! Tensors appear in the order conv1.weight, conv1.bias, bn1.scale,
//! bn1.shift, bn1.running_mean, bn1.running_var, options, conv2.weight,
//! conv2.bias, fc.weight, fc.bias, where `options` is the 3-vector
//! (bn epsilon, bn momentum, l2-normalize flag).

use super::network::NetworkParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"PFNN";
pub const MODEL_VERSION: u8 = 1;
const TENSOR_COUNT: u32 = 11;
const MAX_RANK: u32 = 8;

/// Little-endian byte reader with distinguishable truncation errors.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Malformed(format!("payload of {n} floats overflows")))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Malformed("string is not UTF-8".into()))
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = &self.bytes[..self.bytes.len().min(4)];
        if found != expected {
            return Err(Error::BadMagic {
                expected,
                found: found.to_vec(),
            });
        }
        self.pos = 4;
        Ok(())
    }

    pub(crate) fn version(&mut self, expected: u8) -> Result<()> {
        let found = self.u8()?;
        if found != expected {
            return Err(Error::VersionMismatch { expected, found });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor<f32>) {
    put_u32(out, t.shape().len() as u32);
    for &d in t.shape() {
        put_u32(out, d as u32);
    }
    put_f32s(out, t.data());
}

fn read_tensor(r: &mut Reader<'_>) -> Result<Tensor<f32>> {
    let rank = r.u32()?;
    if rank > MAX_RANK {
        return Err(Error::Malformed(format!("tensor rank {rank} exceeds {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut len = 1usize;
    for _ in 0..rank {
        let d = r.u32()? as usize;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::Malformed("tensor size overflows".into()))?;
        dims.push(d);
    }
    let data = r.f32s(len)?;
    Tensor::from_vec(&dims, data)
}

pub fn serialize_params(params: &NetworkParams<f32>) -> Vec<u8> {
    let options = Tensor::from_vec(
        &[3],
        vec![
            params.bn1.eps,
            params.bn1.momentum,
            if params.l2_normalize { 1.0 } else { 0.0 },
        ],
    )
    .expect("options shape");
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.push(MODEL_VERSION);
    put_u32(&mut out, TENSOR_COUNT);
    for t in [
        &params.conv1_weight,
        &params.conv1_bias,
        &params.bn1.scale,
        &params.bn1.shift,
        &params.bn1.running_mean,
        &params.bn1.running_var,
        &options,
        &params.conv2_weight,
        &params.conv2_bias,
        &params.fc_weight,
        &params.fc_bias,
    ] {
        put_tensor(&mut out, t);
    }
    out
}

pub fn deserialize_params(bytes: &[u8]) -> Result<NetworkParams<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;
    let count = r.u32()?;
    if count != TENSOR_COUNT {
        return Err(Error::Malformed(format!(
            "model has {count} tensors, expected {TENSOR_COUNT}"
        )));
    }
    let mut tensors = Vec::with_capacity(TENSOR_COUNT as usize);
    for _ in 0..TENSOR_COUNT {
        tensors.push(read_tensor(&mut r)?);
    }
    r.finish()?;
    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("count checked");
    let (conv1_weight, conv1_bias, scale, shift, running_mean, running_var, options) =
        (next(), next(), next(), next(), next(), next(), next());
    if options.shape() != [3] {
        return Err(Error::Malformed(format!("options tensor shape {:?}", options.shape())));
    }
    let opts = options.data();
    let l2_normalize = match opts[2] {
        v if v == 0.0 => false,
        v if v == 1.0 => true,
        v => return Err(Error::Malformed(format!("l2-normalize flag {v} is not 0 or 1"))),
    };
    let params = NetworkParams {
        conv1_weight,
        conv1_bias,
        bn1: crate::nn::BatchNorm {
            scale,
            shift,
            running_mean,
            running_var,
            eps: opts[0],
            momentum: opts[1],
        },
        conv2_weight: next(),
        conv2_bias: next(),
        fc_weight: next(),
        fc_bias: next(),
        l2_normalize,
    };
    params.validate().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(params)
}
