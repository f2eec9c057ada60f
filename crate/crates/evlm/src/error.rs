use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left {lhs:?} vs right {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: expects {expected} elements, data has {actual}")]
    InvalidShape {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("cross entropy: mask selects zero positions")]
    EmptyMask,

    #[error("sequence length {len} exceeds block size {block_size}")]
    SequenceTooLong { len: usize, block_size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{malformed} of {total} input lines are malformed (limit {limit_percent}%)")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit_percent: u8,
    },

    #[error("split would leave an empty {0} set")]
    EmptySplit(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("PCA rank {k} exceeds limit {max} (need k <= min(n-1, d))")]
    PcaRank { k: usize, max: usize },

    #[error("t-SNE needs n > 3*perplexity; got n={n}, perplexity={perplexity}")]
    TsneTooSmall { n: usize, perplexity: f64 },

    #[error("non-finite loss {loss} at step {step}; aborting training")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
