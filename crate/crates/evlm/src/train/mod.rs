//! MLM pretraining: AdamW optimization with gradient accumulation, plus
//! intrinsic metric evaluation.

mod adam;
mod metrics;
mod trainer;

pub use adam::{AdamW, GradAccum};
pub use metrics::{evaluate, EvalOptions, MetricsReport};
pub use trainer::{train, EvalRecord, StepRecord, TrainConfig, TrainOutputs, TrainReport};
