//! Linear PCA via eigendecomposition of the sample covariance.

use super::linalg::eigh_symmetric;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// n x k projections of the centered data.
    pub projected: Vec<f64>,
    /// d x k matrix with orthonormal principal directions as columns.
    pub components: Vec<f64>,
    /// Top-k eigenvalues of the covariance (unbiased, 1/(n-1)).
    pub explained_variance: Vec<f64>,
    /// Eigenvalues over total variance; non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

impl PcaResult {
    /// Mean squared reconstruction residual per sample (Frobenius, over n-1),
    /// which equals the sum of the discarded eigenvalues.
    pub fn reconstruction_error(&self, x: &[f64]) -> f64 {
        let (n, d, k) = (self.n, self.d, self.k);
        let mut sse = 0.0;
        for i in 0..n {
            for j in 0..d {
                let mut recon = self.mean[j];
                for c in 0..k {
                    recon += self.projected[i * k + c] * self.components[j * k + c];
                }
                let diff = x[i * d + j] - recon;
                sse += diff * diff;
            }
        }
        sse / (n as f64 - 1.0)
    }
}

/// Projects row-major `x` (n x d) onto its first `k` principal components.
pub fn pca_project(x: &[f64], n: usize, d: usize, k: usize) -> Result<PcaResult> {
    if n < 2 {
        return Err(Error::EmptyInput("PCA needs at least two samples"));
    }
    assert_eq!(x.len(), n * d);
    let max_k = d.min(n - 1);
    if k == 0 || k > max_k {
        return Err(Error::PcaRank { k, max: max_k });
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[i * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut centered = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            centered[i * d + j] = x[i * d + j] - mean[j];
        }
    }

    // covariance = X^T X / (n - 1)
    let mut cov = vec![0.0; d * d];
    for row in 0..n {
        let r = &centered[row * d..(row + 1) * d];
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }

    let (eigenvalues, eigenvectors) = eigh_symmetric(&cov, d);
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = vec![0.0; d * k];
    for row in 0..d {
        for col in 0..k {
            components[row * k + col] = eigenvectors[row * d + col];
        }
    }
    let explained_variance: Vec<f64> = eigenvalues[..k].to_vec();
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|&v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
        .collect();

    let mut projected = vec![0.0; n * k];
    for i in 0..n {
        for c in 0..k {
            let mut acc = 0.0;
            for j in 0..d {
                acc += centered[i * d + j] * components[j * k + c];
            }
            projected[i * k + c] = acc;
        }
    }

    Ok(PcaResult {
        projected,
        components,
        explained_variance,
        explained_variance_ratio,
        mean,
        n,
        d,
        k,
    })
}
