//! Long-context transformer encoder with dilated sliding-window plus global
//! attention, and the tied-embedding MLM head.

mod attention;
mod config;
mod encoder;

pub use attention::{build_attention_pattern, windowed_attention, AttentionPattern};
pub use config::{ModelConfig, Preset};
pub use encoder::{encoder_forward, mlm_logits, EncoderForward, EncoderWeights, ForwardMode};
