//! Cluster fingerprints: per-cluster event-class histograms.

use std::collections::BTreeMap;

use crate::pipeline::{PlayerDocument, CLS_TOKEN, SEP_TOKEN};

/// Normalized event-class histogram for one cluster.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Fingerprint {
    pub cluster: usize,
    pub size: usize,
    /// class -> fraction; sums to 1 for non-empty clusters.
    pub histogram: BTreeMap<String, f64>,
    /// Set when the cluster has fewer members than the minimum size.
    pub below_min_size: bool,
}

/// Aggregates event-class counts from cluster members' documents. Class
/// tokens are the document tokens that are neither special tokens nor
/// `key:value` field tokens. Clusters smaller than `min_size` are flagged so
/// reports can exclude them.
pub fn cluster_fingerprint(
    assignments: &[usize],
    documents: &[PlayerDocument],
    k: usize,
    min_size: usize,
) -> Vec<Fingerprint> {
    assert_eq!(
        assignments.len(),
        documents.len(),
        "assignments must cover all players"
    );
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); k];
    let mut sizes = vec![0usize; k];
    for (&cluster, doc) in assignments.iter().zip(documents) {
        sizes[cluster] += 1;
        for token in doc.text.split_whitespace() {
            if token == CLS_TOKEN || token == SEP_TOKEN || token.contains(':') {
                continue;
            }
            *counts[cluster].entry(token.to_string()).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(cluster, class_counts)| {
            let total: usize = class_counts.values().sum();
            let histogram = class_counts
                .into_iter()
                .map(|(class, count)| (class, count as f64 / total.max(1) as f64))
                .collect();
            Fingerprint {
                cluster,
                size: sizes[cluster],
                histogram,
                below_min_size: sizes[cluster] < min_size,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> PlayerDocument {
        PlayerDocument {
            player_id: id.into(),
            text: text.into(),
            session_offsets: vec![],
        }
    }

    #[test]
    fn single_player_single_class_gives_unit_bin() {
        let docs = vec![doc("p1", "[CLS] round_start round_start round_start [SEP]")];
        let prints = cluster_fingerprint(&[0], &docs, 1, 1);
        assert_eq!(prints.len(), 1);
        assert_eq!(prints[0].histogram.len(), 1);
        assert!((prints[0].histogram["round_start"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histograms_sum_to_one_and_skip_field_tokens() {
        let docs = vec![
            doc("p1", "[CLS] a x:1 b y:2 [SEP] a z:3 [SEP]"),
            doc("p2", "[CLS] b m:4 [SEP]"),
            doc("p3", "[CLS] c [SEP]"),
        ];
        let prints = cluster_fingerprint(&[0, 0, 1], &docs, 2, 2);
        for p in &prints {
            let total: f64 = p.histogram.values().sum();
            assert!((total - 1.0).abs() < 1e-12, "cluster {} sums to {total}", p.cluster);
        }
        // cluster 0: a, b, a, b -> a: 0.5, b: 0.5
        assert!((prints[0].histogram["a"] - 0.5).abs() < 1e-12);
        assert!((prints[0].histogram["b"] - 0.5).abs() < 1e-12);
        assert!(!prints[0].below_min_size);
        // cluster 1 has one member, below min size 2
        assert!(prints[1].below_min_size);
        assert_eq!(prints[1].size, 1);
    }
}
