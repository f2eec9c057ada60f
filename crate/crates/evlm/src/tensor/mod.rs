//! Minimal dense-tensor numerics with reverse-mode automatic differentiation.
//!
//! Everything is 64-bit floats in row-major order. There are no views or
//! strides; an operation either returns a fresh buffer or records itself on a
//! [`Tape`] so gradients can be replayed in reverse.

mod gradcheck;
mod kernels;
mod ops;
mod serialize;
mod tape;

pub use gradcheck::{grad_check, DEFAULT_GRADCHECK_STEP};
pub use ops::{cross_entropy_masked, layer_norm, matmul, softmax_rows};
pub use serialize::{load_tensors, read_tensors, save_tensors, write_tensors, CONTAINER_MAGIC};
pub use tape::{Tape, ValueId};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense row-major f64 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    /// Whether backward passes should produce a gradient for this tensor.
    pub requires_grad: bool,
    /// Populated by [`Tape::backward`] write-back or by the optimizer; always
    /// the same length as `data` when present.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    /// Gaussian init with the given standard deviation.
    pub fn randn<R: Rng>(shape: Vec<usize>, std: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * std
            })
            .collect();
        Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Extent of a 2-D tensor's leading axis; rank-1 tensors count as one row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    /// Trailing-axis extent.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }
}

/// Per-row sets of allowed column indices, CSR style.
///
/// Row `i` owns `keys[offsets[i]..offsets[i+1]]`, sorted ascending. This is
/// the storage behind banded attention patterns: the pair count is
/// `keys.len()`, never `n*n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrIndex {
    pub offsets: Vec<usize>,
    pub keys: Vec<u32>,
}

impl CsrIndex {
    pub fn n_rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.keys[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Total number of allowed (query, key) pairs.
    pub fn pair_count(&self) -> usize {
        self.keys.len()
    }

    pub fn contains(&self, row: usize, key: u32) -> bool {
        self.row(row).binary_search(&key).is_ok()
    }
}
