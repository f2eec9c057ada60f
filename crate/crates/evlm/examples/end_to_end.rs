//! The whole pipeline in one program, sized to finish in a few minutes:
//! generate -> preprocess -> pretrain -> embed -> PCA -> t-SNE -> GMM ->
//! fingerprints, then score the recovered clusters against the generator's
//! ground-truth archetypes.
//!
//! ```bash
//! cargo run --release --example end_to_end
//! ```

use std::collections::BTreeMap;

use evlm::analysis::{
    adjusted_rand_index, cluster_fingerprint, embed_players, gmm_fit, pca_project, tsne_embed,
    GmmConfig, TsneConfig,
};
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
    // 1. synthetic corpus with four well-separated archetypes
    let corpus = generate_corpus(&GeneratorConfig::new(separated_four(), 120, 6, 17))?;
    let documents = corpus_to_documents(&corpus);
    println!("corpus: {} events, {} sessions", corpus.events.len(), corpus.total_sessions());

    // 2. split and vocabulary
    let (train_docs, val_docs) = split_train_val(documents.clone(), 0.67, 17)?;
    let texts: Vec<&str> = train_docs.iter().map(|d| d.text.as_str()).collect();
    let vocab = Vocabulary::build(texts.iter().copied(), 1);

    // 3. pretrain a compact encoder with the MLM objective
    let config = ModelConfig {
        hidden_layers: 2,
        heads: 2,
        hidden_dim: 48,
        block_size: 512,
        window: 32,
        dilation: 1,
        global_positions: vec![0],
        vocab_size: vocab.len(),
        ff_multiplier: 2,
        dropout: 0.0,
        strict_window: false,
    };
    let mut weights = EncoderWeights::init(config, 17)?;
    let train_config = TrainConfig {
        epochs: 40,
        learning_rate: 2e-3,
        eval_every: 50,
        max_steps: Some(200),
        seed: 17,
        ..TrainConfig::default()
    };
    let report = train(&mut weights, &train_docs, &val_docs, &vocab, &train_config, &TrainOutputs::default())?;
    let m = &report.final_metrics;
    println!(
        "pretraining: {} steps, accuracy {:.3}, perplexity {:.3} ({:.0}s)",
        report.steps.len(),
        m.accuracy,
        m.perplexity,
        report.wall_seconds
    );

    // 4. embeddings for every player
    let matrix = embed_players(&weights, &vocab, &documents)?;

    // 5. PCA -> t-SNE -> GMM with k = number of archetypes
    let pca = pca_project(&matrix.data, matrix.n_players(), matrix.dim, 20)?;
    let tsne = tsne_embed(
        &pca.projected,
        matrix.n_players(),
        20,
        &TsneConfig { perplexity: 20.0, seed: 17, ..TsneConfig::default() },
    )?;
    let gmm = gmm_fit(&tsne.coords, matrix.n_players(), 2, &GmmConfig { k: 4, seed: 17, ..GmmConfig::default() })?;

    // 6. score against ground truth
    let mut archetype_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for truth in &corpus.truth {
        let next = archetype_ids.len();
        archetype_ids.entry(truth.archetype.as_str()).or_insert(next);
    }
    let truth_labels: Vec<usize> = corpus
        .truth
        .iter()
        .map(|t| archetype_ids[t.archetype.as_str()])
        .collect();
    let ari = adjusted_rand_index(&gmm.assignments, &truth_labels);
    println!("adjusted Rand index vs ground truth: {ari:.3}");

    // 7. behavior fingerprints per cluster
    for fp in cluster_fingerprint(&gmm.assignments, &documents, 4, 3) {
        let mut top: Vec<(&String, &f64)> = fp.histogram.iter().collect();
        top.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap());
        let head: Vec<String> = top
            .iter()
            .take(2)
            .map(|(class, share)| format!("{class} {:.0}%", **share * 100.0))
            .collect();
        println!("cluster {} ({:>3} players): {}", fp.cluster, fp.size, head.join(", "));
    }
    Ok(())
}
