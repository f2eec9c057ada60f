//! Word-level vocabulary, encoding, and MLM mask application.

mod mask;
mod vocab;

pub use mask::{apply_mlm_mask, MaskedToken, DEFAULT_MASK_RATE};
pub use vocab::{Vocabulary, CLS_ID, MASK_ID, PAD_ID, SEP_ID, SPECIAL_TOKENS, UNK_ID};

/// An encoded, maskable sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Attention validity; padding positions are invalid.
    pub valid: Vec<bool>,
    /// MLM labels: original id at masked positions, `None` elsewhere.
    /// Absent until [`apply_mlm_mask`] runs.
    pub labels: Option<Vec<Option<u32>>>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Drops trailing padding; used by the trainer so per-item forward passes
    /// only pay for real tokens.
    pub fn trimmed(&self) -> TokenSequence {
        let len = self.valid.iter().rposition(|&v| v).map_or(0, |p| p + 1);
        TokenSequence {
            ids: self.ids[..len].to_vec(),
            valid: self.valid[..len].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..len].to_vec()),
        }
    }
}
