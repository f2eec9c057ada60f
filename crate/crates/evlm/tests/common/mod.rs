//! Shared test helpers: the dense attention reference and corpus fixtures.

use std::collections::BTreeMap;

use evlm::model::AttentionPattern;
use evlm::pipeline::{
    filter_and_map, render_document, sessionize, FilterSpec, PlayerDocument,
};
use evlm::synth::GeneratedCorpus;
use evlm::tensor::Tensor;

/// Dense reference attention: materializes the full n x n score matrix,
/// applies an additive -infinity mask on disallowed pairs, softmaxes each
/// row, and multiplies by V. Rows with no allowed keys become zero rows.
/// Independent of the banded implementation under test.
pub fn dense_masked_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    pattern: &AttentionPattern,
) -> Tensor {
    let n = q.rows();
    let model_dim = q.cols();
    let dim = model_dim / heads;
    let scale = 1.0 / (dim as f64).sqrt();
    let mut out = vec![0.0; n * model_dim];
    for h in 0..heads {
        let col0 = h * dim;
        for i in 0..n {
            // full score row with -inf outside the pattern
            let mut scores = vec![f64::NEG_INFINITY; n];
            let mut any = false;
            for j in 0..n {
                if pattern.is_allowed(i, j) {
                    let mut dot = 0.0;
                    for c in 0..dim {
                        dot += q.data()[i * model_dim + col0 + c] * k.data()[j * model_dim + col0 + c];
                    }
                    scores[j] = dot * scale;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp(); // exp(-inf) = 0 exactly
                sum += *s;
            }
            for j in 0..n {
                let w = scores[j] / sum;
                if w == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    out[i * model_dim + col0 + c] += w * v.data()[j * model_dim + col0 + c];
                }
            }
        }
    }
    Tensor::from_vec(vec![n, model_dim], out).unwrap()
}

/// Runs the preprocessing pipeline over a generated corpus and returns the
/// documents in player-id order.
#[allow(dead_code)] // not every test binary uses every helper
pub fn corpus_to_documents(corpus: &GeneratedCorpus, gap_minutes: u64) -> Vec<PlayerDocument> {
    let spec = FilterSpec::bundled();
    let filtered = filter_and_map(&corpus.events, &spec);
    let mut by_player: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for event in filtered.events {
        by_player.entry(event.player_id.clone()).or_default().push(event);
    }
    by_player
        .into_iter()
        .map(|(player_id, events)| {
            let sessions = sessionize(&player_id, events, gap_minutes);
            render_document(&player_id, &sessions)
        })
        .collect()
}
