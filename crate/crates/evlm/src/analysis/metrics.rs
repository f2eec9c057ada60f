//! Cluster-quality metrics.

/// Chance-corrected agreement between two partitions of the same points.
/// 1.0 means identical up to label permutation, ~0 means chance level.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut contingency = vec![0usize; ka * kb];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        contingency[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = contingency.iter().map(|&c| choose2(c)).sum();
    let row_sum: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let col_sum: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = row_sum * col_sum / choose2(n);
    let max_index = 0.5 * (row_sum + col_sum);
    if (max_index - expected).abs() < 1e-300 {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Mean silhouette coefficient over all points, computed exactly.
pub fn silhouette_score(x: &[f64], n: usize, d: usize, labels: &[usize]) -> f64 {
    assert_eq!(labels.len(), n);
    assert_eq!(x.len(), n * d);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut cluster_sizes = vec![0usize; k];
    for &l in labels {
        cluster_sizes[l] += 1;
    }

    let dist = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for c in 0..d {
            let diff = x[i * d + c] - x[j * d + c];
            acc += diff * diff;
        }
        acc.sqrt()
    };

    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..n {
        if cluster_sizes[labels[i]] < 2 {
            continue; // silhouette undefined for singleton clusters
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(i, j);
            }
        }
        let own = labels[i];
        let a = sums[own] / (cluster_sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && cluster_sizes[c] > 0)
            .map(|c| sums[c] / cluster_sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
            counted += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions_score_one() {
        let a = vec![0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&a, &a) - 1.0).abs() < 1e-12);
        // label permutation does not matter
        let b = vec![2, 2, 0, 0, 1, 1];
        assert!((adjusted_rand_index(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_partitions_score_near_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a: Vec<usize> = (0..2000).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<usize> = (0..2000).map(|_| rng.gen_range(0..4)).collect();
        let ari = adjusted_rand_index(&a, &b);
        assert!(ari.abs() < 0.05, "ARI {ari}");
    }

    #[test]
    fn ari_matches_hand_computed_example() {
        // classic small example: a = [0,0,1,1], b = [0,0,0,1]
        // contingency: (2,0),(1,1); index=1, rows=2, cols=3+0=3... computed by hand:
        // sum_ij C(n_ij,2) = C(2,2)+C(1,2)+C(1,2) = 1
        // rows: C(2,2)+C(2,2) = 2 ; cols: C(3,2)+C(1,2) = 3
        // expected = 2*3/C(4,2) = 1 ; max = 2.5 ; ARI = (1-1)/(2.5-1) = 0
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 0, 1]);
        assert!(ari.abs() < 1e-12, "ARI {ari}");
    }

    #[test]
    fn silhouette_separated_vs_mixed() {
        // two tight, far-apart groups
        let x = vec![0.0, 0.0, 0.1, 0.0, 10.0, 0.0, 10.1, 0.0];
        let labels = vec![0, 0, 1, 1];
        assert!(silhouette_score(&x, 4, 2, &labels) > 0.9);
        // swap labels across groups: much worse
        let bad = vec![0, 1, 0, 1];
        assert!(silhouette_score(&x, 4, 2, &bad) < 0.0);
    }
}
