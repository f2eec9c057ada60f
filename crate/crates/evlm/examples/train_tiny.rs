//! Quick MLM pretraining demo on a tiny synthetic corpus: a couple of
//! minutes of CPU, loss visibly dropping and metrics reported.
//!
//! ```bash
//! cargo run --release --example train_tiny
//! ```

use std::collections::BTreeMap;

use evlm::model::{EncoderWeights, ModelConfig};
use evlm::pipeline::{
    filter_and_map, render_document, sessionize, split_train_val, FilterSpec, PlayerDocument,
};
use evlm::synth::{generate_corpus, separated_four, GeneratedCorpus, GeneratorConfig};
use evlm::tokenizer::Vocabulary;
use evlm::train::{train, TrainConfig, TrainOutputs};

fn corpus_to_documents(corpus: &GeneratedCorpus) -> Vec<PlayerDocument> {
    let filtered = filter_and_map(&corpus.events, &FilterSpec::bundled());
    let mut by_player: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for event in filtered.events {
        by_player.entry(event.player_id.clone()).or_default().push(event);
    }
    by_player
        .into_iter()
        .map(|(id, events)| render_document(&id, &sessionize(&id, events, 15)))
        .collect()
}

fn main() -> anyhow::Result<()> {
    let corpus = generate_corpus(&GeneratorConfig::new(separated_four(), 80, 5, 11))?;
    let documents = corpus_to_documents(&corpus);
    let (train_docs, val_docs) = split_train_val(documents, 0.67, 11)?;
    let texts: Vec<&str> = train_docs.iter().map(|d| d.text.as_str()).collect();
    let vocab = Vocabulary::build(texts.iter().copied(), 1);

    // a deliberately small encoder so the demo finishes fast
    let config = ModelConfig {
        hidden_layers: 2,
        heads: 2,
        hidden_dim: 32,
        block_size: 512,
        window: 32,
        dilation: 1,
        global_positions: vec![0],
        vocab_size: vocab.len(),
        ff_multiplier: 2,
        dropout: 0.0,
        strict_window: false,
    };
    let mut weights = EncoderWeights::init(config, 11)?;
    println!(
        "model: {} parameters, vocab {}, {} train / {} val docs",
        weights.total_elements(),
        vocab.len(),
        train_docs.len(),
        val_docs.len()
    );

    let train_config = TrainConfig {
        epochs: 30,
        learning_rate: 2e-3,
        eval_every: 25,
        max_steps: Some(150),
        seed: 11,
        ..TrainConfig::default()
    };
    let report = train(
        &mut weights,
        &train_docs,
        &val_docs,
        &vocab,
        &train_config,
        &TrainOutputs::default(),
    )?;

    println!("step    loss");
    for record in report.steps.iter().step_by(15) {
        println!("{:>4}  {:.4}", record.step, record.loss);
    }
    for eval in &report.evals {
        println!(
            "eval @ step {:>4}: accuracy {:.3}, cross-entropy {:.3}, perplexity {:.3}",
            eval.step, eval.metrics.accuracy, eval.metrics.cross_entropy, eval.metrics.perplexity
        );
    }
    let m = &report.final_metrics;
    println!(
        "final after {:.0}s: accuracy {:.3}, perplexity {:.3}",
        report.wall_seconds, m.accuracy, m.perplexity
    );
    Ok(())
}
