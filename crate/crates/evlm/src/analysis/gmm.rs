//! Gaussian mixture fitting by EM with full covariances.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::linalg::{cholesky, cholesky_log_det, cholesky_solve};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GmmConfig {
    pub k: usize,
    pub seed: u64,
    /// Independent EM runs; the best final log-likelihood wins.
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when the log-likelihood gain per point drops below this.
    pub tol: f64,
    /// Added to covariance diagonals every M-step.
    pub covariance_reg: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 8,
            seed: 0,
            restarts: 10,
            max_iters: 200,
            tol: 1e-9,
            covariance_reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GmmFit {
    pub k: usize,
    pub dim: usize,
    /// Mixture weights, sum to 1.
    pub weights: Vec<f64>,
    /// k x d component means.
    pub means: Vec<f64>,
    /// k full covariances, each d x d row-major.
    pub covariances: Vec<Vec<f64>>,
    /// n x k responsibilities; each row sums to 1.
    pub responsibilities: Vec<f64>,
    /// argmax responsibility per point.
    pub assignments: Vec<usize>,
    /// Total log-likelihood after every EM iteration of the winning run.
    pub log_likelihood_history: Vec<f64>,
    pub log_likelihood: f64,
    /// Degenerate components (weight below 1/n) found after fitting.
    pub warnings: Vec<String>,
}

/// Fits a k-component full-covariance GMM to row-major `x` (n x d), keeping
/// the best of `restarts` seeded EM runs by final log-likelihood.
pub fn gmm_fit(x: &[f64], n: usize, d: usize, config: &GmmConfig) -> Result<GmmFit> {
    if config.k == 0 || n < config.k {
        return Err(Error::Config(format!(
            "GMM needs at least k={} points, got {n}",
            config.k
        )));
    }
    assert_eq!(x.len(), n * d);

    let fits: Vec<GmmFit> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|restart| em_single(x, n, d, config, restart as u64))
        .collect::<Result<Vec<_>>>()?;
    let best = fits
        .into_iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.log_likelihood
                .partial_cmp(&b.log_likelihood)
                .unwrap()
                .then(ib.cmp(ia)) // deterministic tie-break: earliest restart
        })
        .map(|(_, fit)| fit)
        .expect("at least one restart");
    Ok(best)
}

fn em_single(x: &[f64], n: usize, d: usize, config: &GmmConfig, restart: u64) -> Result<GmmFit> {
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart.wrapping_mul(0x9E37)));

    // init: distinct random points as means, shared data covariance
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut means = vec![0.0; k * d];
    for (c, &point) in order.iter().take(k).enumerate() {
        means[c * d..(c + 1) * d].copy_from_slice(&x[point * d..(point + 1) * d]);
    }
    let mut weights = vec![1.0 / k as f64; k];
    let data_cov = sample_covariance(x, n, d, config.covariance_reg);
    let mut covariances = vec![data_cov; k];

    let mut responsibilities = vec![0.0; n * k];
    let mut history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for _iter in 0..config.max_iters {
        // E-step in log space
        let ll = e_step(x, n, d, k, &weights, &means, &covariances, config, &mut responsibilities)?;
        history.push(ll);

        // M-step
        for c in 0..k {
            let resp_sum: f64 = (0..n).map(|i| responsibilities[i * k + c]).sum();
            weights[c] = resp_sum / n as f64;
            let mean = &mut means[c * d..(c + 1) * d];
            mean.fill(0.0);
            if resp_sum > 0.0 {
                for i in 0..n {
                    let r = responsibilities[i * k + c];
                    for j in 0..d {
                        mean[j] += r * x[i * d + j];
                    }
                }
                for m in mean.iter_mut() {
                    *m /= resp_sum;
                }
            }
            let cov = &mut covariances[c];
            cov.fill(0.0);
            if resp_sum > 0.0 {
                for i in 0..n {
                    let r = responsibilities[i * k + c];
                    if r == 0.0 {
                        continue;
                    }
                    for a in 0..d {
                        let da = x[i * d + a] - means[c * d + a];
                        for b in a..d {
                            cov[a * d + b] += r * da * (x[i * d + b] - means[c * d + b]);
                        }
                    }
                }
                for a in 0..d {
                    for b in a..d {
                        cov[a * d + b] /= resp_sum;
                        cov[b * d + a] = cov[a * d + b];
                    }
                }
            }
            for a in 0..d {
                cov[a * d + a] += config.covariance_reg;
            }
        }

        if (ll - prev_ll).abs() < config.tol * n as f64 && prev_ll.is_finite() {
            break;
        }
        prev_ll = ll;
    }
    // final E-step so responsibilities and history match the last parameters
    let ll = e_step(x, n, d, k, &weights, &means, &covariances, config, &mut responsibilities)?;
    history.push(ll);

    let assignments: Vec<usize> = (0..n)
        .map(|i| {
            (0..k)
                .max_by(|&a, &b| {
                    responsibilities[i * k + a]
                        .partial_cmp(&responsibilities[i * k + b])
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap()
        })
        .collect();
    let warnings = degenerate_warnings(&weights, n);

    Ok(GmmFit {
        k,
        dim: d,
        weights,
        means,
        covariances,
        responsibilities,
        assignments,
        log_likelihood: ll,
        log_likelihood_history: history,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn e_step(
    x: &[f64],
    n: usize,
    d: usize,
    k: usize,
    weights: &[f64],
    means: &[f64],
    covariances: &[Vec<f64>],
    config: &GmmConfig,
    responsibilities: &mut [f64],
) -> Result<f64> {
    // Cholesky of each covariance, escalating jitter if near-singular
    let mut factors = Vec::with_capacity(k);
    for cov in covariances {
        let mut jitter = 0.0;
        let factor = loop {
            let mut jittered = cov.clone();
            for a in 0..d {
                jittered[a * d + a] += jitter;
            }
            if let Some(l) = cholesky(&jittered, d) {
                break l;
            }
            jitter = if jitter == 0.0 { config.covariance_reg } else { jitter * 10.0 };
            if jitter > 1e3 {
                return Err(Error::Config("GMM covariance irreparably singular".into()));
            }
        };
        factors.push(factor);
    }
    let log_norm: Vec<f64> = factors
        .iter()
        .map(|l| -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + cholesky_log_det(l, d)))
        .collect();

    let mut total_ll = 0.0;
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let row = &mut responsibilities[i * k..(i + 1) * k];
        for c in 0..k {
            for j in 0..d {
                diff[j] = x[i * d + j] - means[c * d + j];
            }
            let solved = cholesky_solve(&factors[c], &diff, d);
            let mahalanobis: f64 = diff.iter().zip(&solved).map(|(a, b)| a * b).sum();
            row[c] = weights[c].max(1e-300).ln() + log_norm[c] - 0.5 * mahalanobis;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total_ll += log_sum;
        for v in row.iter_mut() {
            *v = (*v - log_sum).exp();
        }
    }
    Ok(total_ll)
}

/// A component whose weight falls below 1/n holds less than one point of
/// total responsibility and is reported rather than silently kept.
fn degenerate_warnings(weights: &[f64], n: usize) -> Vec<String> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w < 1.0 / n as f64)
        .map(|(c, &w)| format!("component {c} is degenerate: weight {w:.3e} < 1/{n}"))
        .collect()
}

fn sample_covariance(x: &[f64], n: usize, d: usize, reg: f64) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[i * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            let da = x[i * d + a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (x[i * d + b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= n as f64;
            cov[b * d + a] = cov[a * d + b];
        }
        cov[a * d + a] += reg;
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_blobs(n_per: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [(0.0, 0.0), (10.0, 10.0)].iter().enumerate() {
            for _ in 0..n_per {
                x.push(center.0 + rng.gen_range(-1.0..1.0) * 0.5);
                x.push(center.1 + rng.gen_range(-1.0..1.0) * 0.5);
                labels.push(c);
            }
        }
        (x, labels)
    }

    #[test]
    fn single_component_recovers_sample_mean() {
        let (x, _) = two_blobs(50, 1);
        let config = GmmConfig { k: 1, restarts: 1, ..GmmConfig::default() };
        let fit = gmm_fit(&x, 100, 2, &config).unwrap();
        let mut mean = [0.0f64; 2];
        for i in 0..100 {
            mean[0] += x[i * 2];
            mean[1] += x[i * 2 + 1];
        }
        mean[0] /= 100.0;
        mean[1] /= 100.0;
        assert!((fit.means[0] - mean[0]).abs() < 1e-9);
        assert!((fit.means[1] - mean[1]).abs() < 1e-9);
        assert!(fit.responsibilities.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_blob_means_recovered_within_tolerance() {
        let (x, labels) = two_blobs(100, 2);
        let config = GmmConfig { k: 2, restarts: 5, seed: 3, ..GmmConfig::default() };
        let fit = gmm_fit(&x, 200, 2, &config).unwrap();
        // match recovered means to the true centers
        let centers = [(0.0, 0.0), (10.0, 10.0)];
        for center in centers {
            let closest = (0..2)
                .map(|c| {
                    let dx = fit.means[c * 2] - center.0;
                    let dy = fit.means[c * 2 + 1] - center.1;
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 0.2, "mean off by {closest}");
        }
        // assignments separate the blobs perfectly up to label swap
        let ari = crate::analysis::adjusted_rand_index(&fit.assignments, &labels);
        assert!(ari > 0.99, "ARI {ari}");
    }

    #[test]
    fn log_likelihood_is_monotone_non_decreasing() {
        let (x, _) = two_blobs(60, 4);
        for seed in 0..5 {
            let config = GmmConfig { k: 3, restarts: 1, seed, ..GmmConfig::default() };
            let fit = gmm_fit(&x, 120, 2, &config).unwrap();
            for pair in fit.log_likelihood_history.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-9,
                    "log-likelihood decreased: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn responsibilities_are_row_stochastic_and_weights_sum_to_one() {
        let (x, _) = two_blobs(40, 5);
        let config = GmmConfig { k: 4, restarts: 2, seed: 6, ..GmmConfig::default() };
        let fit = gmm_fit(&x, 80, 2, &config).unwrap();
        for i in 0..80 {
            let sum: f64 = fit.responsibilities[i * 4..(i + 1) * 4].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        let wsum: f64 = fit.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-9);
        assert!(fit.assignments.iter().all(|&a| a < 4));
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let x = vec![0.0; 6];
        let config = GmmConfig { k: 5, ..GmmConfig::default() };
        assert!(gmm_fit(&x, 3, 2, &config).is_err());
    }

    #[test]
    fn degenerate_weight_rule_flags_starved_components() {
        let warnings = degenerate_warnings(&[0.6, 0.395, 0.005], 100);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("component 2"));
        // healthy fits report nothing
        let (x, _) = two_blobs(50, 7);
        let config = GmmConfig { k: 2, restarts: 3, seed: 8, ..GmmConfig::default() };
        let fit = gmm_fit(&x, 100, 2, &config).unwrap();
        assert!(fit.warnings.is_empty());
    }
}
