//! Self-supervised player representations from behavior event logs.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! 1. [`synth`] — synthetic event-log generator with ground-truth archetypes
//! 2. [`pipeline`] — raw JSONL events → filtered, sessionized token documents
//! 3. [`tokenizer`] — word-level vocabulary, encoding, MLM masking
//! 4. [`model`] — long-context encoder with dilated sliding-window attention
//! 5. [`train`] — MLM pretraining loop with AdamW and intrinsic metrics
//! 6. [`analysis`] — max-pooled embeddings, PCA, t-SNE, GMM, fingerprints
//!
//! Everything numeric sits on [`tensor`], a minimal f64 tensor library with
//! reverse-mode autodiff. See the `examples/` directory for one runnable
//! program per capability, and the `evlm` binary for the file-based CLI.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};
