//! Dense row-major f32 tensors behind an 8-byte magic.

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::path::Path;

pub const TENSOR_MAGIC: &[u8; 8] = b"TGR1TENS";

/// Shape plus row-major values. Values are narrowed to f32 on write.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape("tensor payload", n, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| v as f32).collect())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            data.extend(m.row(r).iter().map(|&v| v as f32));
        }
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self.shape.as_slice() {
            [r, c] => Ok(DMatrix::from_row_iterator(*r, *c, self.data.iter().map(|&v| v as f64))),
            _ => Err(Error::shape("tensor rank", 2, self.shape.len())),
        }
    }
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * t.shape.len() + 4 * t.data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
    for &d in &t.shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    if bytes.len() < 12 || &bytes[..8] != TENSOR_MAGIC {
        return Err(Error::format(path, "bad tensor magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let rank = u32_at(8);
    let header = 12 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::format(
            path,
            format!("truncated header: expected {header} bytes, got {}", bytes.len()),
        ));
    }
    let shape: Vec<usize> = (0..rank).map(|i| u32_at(12 + 4 * i)).collect();
    let expected = shape
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(path, "tensor dimensions overflow"))?;
    let actual = bytes.len() - header;
    if actual != expected {
        return Err(Error::format(
            path,
            format!("payload size mismatch: expected {expected} bytes, got {actual}"),
        ));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Tensor { shape, data })
}

pub fn write_tensor(t: &Tensor, path: &Path) -> Result<()> {
    write_atomic(path, &encode_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&read_bytes(path)?, path)
}
