//! Exact t-SNE with per-point perplexity calibration, early exaggeration,
//! and momentum gradient descent. Quadratic in n and meant for desk-scale
//! inputs (a few thousand points).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    /// P is multiplied by this factor for the first `exaggeration_iters`.
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    /// n x 2 embedding coordinates.
    pub coords: Vec<f64>,
    /// KL(P||Q) right after initialization, with the un-exaggerated P.
    pub initial_kl: f64,
    pub final_kl: f64,
    /// Worst |entropy - log(perplexity)| over points after calibration.
    pub calibration_entropy_error: f64,
    pub n: usize,
}

/// Symmetrized, normalized input similarities plus the worst calibration
/// error. Conditional distributions are calibrated by binary search so each
/// point's entropy is log(perplexity).
pub fn joint_probabilities(x: &[f64], n: usize, d: usize, perplexity: f64) -> (Vec<f64>, f64) {
    let mut dist2 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..d {
                let diff = x[i * d + c] - x[j * d + c];
                acc += diff * diff;
            }
            dist2[i * n + j] = acc;
            dist2[j * n + i] = acc;
        }
    }

    let target_entropy = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(&dist2[i * n..(i + 1) * n], i, target_entropy))
        .collect();

    let mut p = vec![0.0; n * n];
    let mut worst = 0.0f64;
    for (i, (row, err)) in rows.iter().enumerate() {
        worst = worst.max(*err);
        for j in 0..n {
            p[i * n + j] = row[j];
        }
    }
    // symmetrize and normalize to sum 1
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ((p[i * n + j] + p[j * n + i]) * scale).max(1e-12);
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
        p[i * n + i] = 0.0;
    }
    (p, worst)
}

/// Binary search for the Gaussian precision that hits the target entropy.
fn calibrate_row(dist2: &[f64], i: usize, target_entropy: f64) -> (Vec<f64>, f64) {
    let n = dist2.len();
    let mut beta = 1.0f64;
    let (mut beta_min, mut beta_max) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut row = vec![0.0; n];
    let mut best_err = f64::INFINITY;
    for _ in 0..80 {
        let mut sum = 0.0;
        for j in 0..n {
            row[j] = if j == i { 0.0 } else { (-beta * dist2[j]).exp() };
            sum += row[j];
        }
        let mut entropy = 0.0;
        if sum > 0.0 {
            for j in 0..n {
                if j != i {
                    let pj = row[j] / sum;
                    row[j] = pj;
                    if pj > 1e-300 {
                        entropy -= pj * pj.ln();
                    }
                }
            }
        }
        let diff = entropy - target_entropy;
        best_err = best_err.min(diff.abs());
        if diff.abs() < 1e-7 {
            return (row, diff.abs());
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_infinite() { beta * 2.0 } else { (beta + beta_max) / 2.0 };
        } else {
            beta_max = beta;
            beta = if beta_min.is_infinite() { beta / 2.0 } else { (beta + beta_min) / 2.0 };
        }
    }
    (row, best_err)
}

fn kl_divergence(p: &[f64], coords: &[f64], n: usize) -> f64 {
    let mut q_sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            q_sum += 2.0 * student_t(coords, i, j);
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            let qij = (student_t(coords, i, j) / q_sum).max(1e-12);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}

#[inline]
fn student_t(coords: &[f64], i: usize, j: usize) -> f64 {
    let dx = coords[i * 2] - coords[j * 2];
    let dy = coords[i * 2 + 1] - coords[j * 2 + 1];
    1.0 / (1.0 + dx * dx + dy * dy)
}

/// Maps n x k input rows to 2-D. Deterministic given the seed; the returned
/// KL pair certifies the optimization made progress.
pub fn tsne_embed(x: &[f64], n: usize, d: usize, config: &TsneConfig) -> Result<TsneResult> {
    if n as f64 <= 3.0 * config.perplexity {
        return Err(Error::TsneTooSmall { n, perplexity: config.perplexity });
    }
    assert_eq!(x.len(), n * d);
    let (p, calibration_entropy_error) = joint_probabilities(x, n, d, config.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut coords = Tensor::randn(vec![n, 2], 1e-4, &mut rng).data().to_vec();
    let initial_kl = kl_divergence(&p, &coords, n);

    let mut velocity = vec![0.0f64; n * 2];
    let mut gains = vec![1.0f64; n * 2];
    // cap the exaggeration phase so short runs still spend most iterations on
    // the true objective
    let exaggerated_iters = config.exaggeration_iters.min(config.iters / 3);
    for iter in 0..config.iters {
        let exaggeration = if iter < exaggerated_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < exaggerated_iters { 0.5 } else { 0.8 };

        // Q normalizer: per-row partial sums reduced in index order so the
        // result does not depend on the thread schedule.
        let partial: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| student_t(&coords, i, j)).sum::<f64>())
            .collect();
        let q_sum: f64 = 2.0 * partial.iter().sum::<f64>();

        let grad: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut gx = 0.0f64;
                let mut gy = 0.0f64;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let num = student_t(&coords, i, j);
                    let qij = (num / q_sum).max(1e-12);
                    let mult = 4.0 * (exaggeration * p[i * n + j] - qij) * num;
                    gx += mult * (coords[i * 2] - coords[j * 2]);
                    gy += mult * (coords[i * 2 + 1] - coords[j * 2 + 1]);
                }
                [gx, gy]
            })
            .collect();

        for e in 0..n * 2 {
            let same_sign = grad[e].signum() == velocity[e].signum();
            gains[e] = if same_sign { (gains[e] * 0.8).max(0.01) } else { gains[e] + 0.2 };
            velocity[e] = momentum * velocity[e] - config.learning_rate * gains[e] * grad[e];
            coords[e] += velocity[e];
        }
        // keep the embedding centered
        let (mut mx, mut my) = (0.0, 0.0);
        for i in 0..n {
            mx += coords[i * 2];
            my += coords[i * 2 + 1];
        }
        mx /= n as f64;
        my /= n as f64;
        for i in 0..n {
            coords[i * 2] -= mx;
            coords[i * 2 + 1] -= my;
        }
    }

    let final_kl = kl_divergence(&p, &coords, n);
    Ok(TsneResult { coords, initial_kl, final_kl, calibration_entropy_error, n })
}
