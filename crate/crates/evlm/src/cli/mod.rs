//! File-based pipeline stages behind the `evlm` binary: each stage consumes
//! the previous stage's declared formats, writes its outputs, and records a
//! run manifest sufficient to reproduce the run bit-for-bit.

mod manifest;
mod stages;

pub use manifest::{OutputRecord, RunManifest};
pub use stages::{
    run_cluster, run_embed, run_eval, run_generate, run_preprocess, run_report, run_train,
    ClusterArgs, EmbedArgs, EvalArgs, GenerateArgs, PreprocessArgs, ReportArgs, TrainArgs,
};
