//! Pure (non-recording) wrappers over the shared kernels for callers that do
//! not need gradients.

use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Standard matrix product of a (m x k) and b (k x n).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        });
    }
    let (m, k, n) = (sa[0], sa[1], sb[1]);
    let mut out = vec![0.0; m * n];
    kernels::matmul_acc(a.data(), b.data(), &mut out, m, k, n);
    Tensor::from_vec(vec![m, n], out)
}

/// Softmax over each trailing-dimension row, max-subtracted for overflow
/// safety. NaN inputs propagate to NaN outputs.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let (rows, cols) = (x.rows(), x.cols());
    let mut data = x.data().to_vec();
    kernels::softmax_rows_inplace(&mut data, rows, cols);
    Tensor::from_vec(x.shape().to_vec(), data).expect("shape preserved")
}

/// Per-row normalization to zero mean / unit variance followed by the affine
/// transform `gain * xhat + bias`.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let (rows, cols) = (x.rows(), x.cols());
    if gain.numel() != cols || bias.numel() != cols {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            lhs: x.shape().to_vec(),
            rhs: gain.shape().to_vec(),
        });
    }
    let mut out = vec![0.0; rows * cols];
    kernels::layer_norm_forward(x.data(), gain.data(), bias.data(), eps, rows, cols, &mut out);
    Tensor::from_vec(x.shape().to_vec(), out)
}

/// Mean negative log-likelihood over the masked rows of `logits` (T x V).
pub fn cross_entropy_masked(logits: &Tensor, targets: &[u32], mask: &[bool]) -> Result<f64> {
    let (rows, vocab) = (logits.rows(), logits.cols());
    if targets.len() != rows || mask.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy_masked",
            lhs: vec![rows, vocab],
            rhs: vec![targets.len(), mask.len()],
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..rows {
        if !mask[t] {
            continue;
        }
        let row = &logits.data()[t * vocab..(t + 1) * vocab];
        total += kernels::log_sum_exp(row) - row[targets[t] as usize];
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / count as f64)
}
