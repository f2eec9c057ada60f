use clap::{Parser, Subcommand};

use evlm::cli::{
    run_cluster, run_embed, run_eval, run_generate, run_preprocess, run_report, run_train,
    ClusterArgs, EmbedArgs, EvalArgs, GenerateArgs, PreprocessArgs, ReportArgs, TrainArgs,
};

/// Player-behavior modeling pipeline: synthetic logs, preprocessing, MLM
/// pretraining, embeddings, and cluster analysis.
#[derive(Parser)]
#[command(name = "evlm", version, about)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event corpus with ground-truth archetypes.
    Generate(GenerateArgs),
    /// Parse, filter, sessionize, and render events into documents.
    Preprocess(PreprocessArgs),
    /// Pretrain the encoder with the MLM objective.
    Train(TrainArgs),
    /// Evaluate a checkpoint's masked-token metrics.
    Eval(EvalArgs),
    /// Extract max-pooled player embeddings from a checkpoint.
    Embed(EmbedArgs),
    /// PCA + t-SNE + GMM cluster analysis over embeddings.
    Cluster(ClusterArgs),
    /// Aggregate stage summaries into one report document.
    Report(ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // best effort: a later second call would fail, which is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Preprocess(args) => run_preprocess(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Embed(args) => run_embed(args),
        Command::Cluster(args) => run_cluster(args),
        Command::Report(args) => run_report(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
