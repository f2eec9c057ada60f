//! MLM mask application with the 80/10/10 corruption scheme.

use rand::Rng;

use super::vocab::{Vocabulary, MASK_ID, SPECIAL_TOKENS};
use super::TokenSequence;

pub const DEFAULT_MASK_RATE: f64 = 0.15;

/// What happened to a selected position; exposed for statistics tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskedToken {
    Masked,
    Corrupted,
    Unchanged,
}

/// Selects each valid, non-special position independently with probability
/// `mask_rate`; of the selected positions 80% become `[MASK]`, 10% a random
/// regular vocabulary token, and 10% stay unchanged. Labels record the
/// original id at every selected position.
///
/// Returns the masked sequence plus the per-position outcome (same length as
/// the sequence, `None` where unselected).
pub fn apply_mlm_mask<R: Rng>(
    seq: &TokenSequence,
    vocab: &Vocabulary,
    mask_rate: f64,
    rng: &mut R,
) -> (TokenSequence, Vec<Option<MaskedToken>>) {
    assert!((0.0..=1.0).contains(&mask_rate), "mask rate {mask_rate} out of [0, 1]");
    let n_specials = SPECIAL_TOKENS.len() as u32;
    let n_regular = vocab.len() as u32 - n_specials;

    let mut ids = seq.ids.clone();
    let mut labels = vec![None; seq.len()];
    let mut outcomes = vec![None; seq.len()];
    for i in 0..seq.len() {
        if !seq.valid[i] || vocab.is_special(seq.ids[i]) {
            continue;
        }
        if rng.gen::<f64>() >= mask_rate {
            continue;
        }
        labels[i] = Some(seq.ids[i]);
        let u: f64 = rng.gen();
        if u < 0.8 {
            ids[i] = MASK_ID;
            outcomes[i] = Some(MaskedToken::Masked);
        } else if u < 0.9 && n_regular > 0 {
            ids[i] = n_specials + rng.gen_range(0..n_regular);
            outcomes[i] = Some(MaskedToken::Corrupted);
        } else {
            outcomes[i] = Some(MaskedToken::Unchanged);
        }
    }
    (
        TokenSequence { ids, valid: seq.valid.clone(), labels: Some(labels) },
        outcomes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::vocab::{CLS_ID, PAD_ID, SEP_ID};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_vocab() -> Vocabulary {
        Vocabulary::build(["a b c d e f g h"], 1)
    }

    fn seq_of(ids: Vec<u32>) -> TokenSequence {
        let valid = ids.iter().map(|&id| id != PAD_ID).collect();
        TokenSequence { ids, valid, labels: None }
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let vocab = test_vocab();
        let seq = seq_of(vec![CLS_ID, 5, 6, 7, SEP_ID, PAD_ID]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (masked, _) = apply_mlm_mask(&seq, &vocab, 0.0, &mut rng);
        assert_eq!(masked.ids, seq.ids);
        assert!(masked.labels.unwrap().iter().all(Option::is_none));
    }

    #[test]
    fn specials_and_padding_are_never_selected() {
        let vocab = test_vocab();
        let seq = seq_of(vec![CLS_ID, 5, SEP_ID, PAD_ID, PAD_ID]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (masked, _) = apply_mlm_mask(&seq, &vocab, 1.0, &mut rng);
            let labels = masked.labels.unwrap();
            assert!(labels[0].is_none() && labels[2].is_none());
            assert!(labels[3].is_none() && labels[4].is_none());
            assert_eq!(masked.ids[0], CLS_ID);
            assert_eq!(masked.ids[2], SEP_ID);
            assert_eq!(masked.ids[3], PAD_ID);
        }
    }

    #[test]
    fn labels_record_original_ids() {
        let vocab = test_vocab();
        let seq = seq_of(vec![5, 6, 7, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (masked, outcomes) = apply_mlm_mask(&seq, &vocab, 1.0, &mut rng);
        let labels = masked.labels.unwrap();
        for i in 0..4 {
            assert_eq!(labels[i], Some(seq.ids[i]));
            match outcomes[i].unwrap() {
                MaskedToken::Masked => assert_eq!(masked.ids[i], MASK_ID),
                MaskedToken::Unchanged => assert_eq!(masked.ids[i], seq.ids[i]),
                MaskedToken::Corrupted => assert!(!vocab.is_special(masked.ids[i])),
            }
        }
    }

    #[test]
    fn same_seed_same_masking() {
        let vocab = test_vocab();
        let seq = seq_of((0..64).map(|i| 5 + (i % 8)).collect());
        let a = apply_mlm_mask(&seq, &vocab, 0.3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = apply_mlm_mask(&seq, &vocab, 0.3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn selection_and_corruption_statistics() {
        // smaller-scale version of the acceptance run: rate and 80/10/10
        let vocab = test_vocab();
        let seq = seq_of((0..1000).map(|i| 5 + (i % 8)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut selected, mut masked, mut corrupted, mut unchanged) = (0usize, 0usize, 0usize, 0usize);
        let rounds = 120;
        for _ in 0..rounds {
            let (_, outcomes) = apply_mlm_mask(&seq, &vocab, 0.15, &mut rng);
            for o in outcomes.into_iter().flatten() {
                selected += 1;
                match o {
                    MaskedToken::Masked => masked += 1,
                    MaskedToken::Corrupted => corrupted += 1,
                    MaskedToken::Unchanged => unchanged += 1,
                }
            }
        }
        let candidates = (rounds * 1000) as f64;
        let rate = selected as f64 / candidates;
        assert!((rate - 0.15).abs() < 0.01, "selection rate {rate}");
        let frac = |x: usize| x as f64 / selected as f64;
        assert!((frac(masked) - 0.8).abs() < 0.02, "mask frac {}", frac(masked));
        assert!((frac(corrupted) - 0.1).abs() < 0.02, "corrupt frac {}", frac(corrupted));
        assert!((frac(unchanged) - 0.1).abs() < 0.02, "unchanged frac {}", frac(unchanged));
    }
}
