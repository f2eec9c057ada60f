//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Criteria 5, 9, and 11 share one trained fixture (synthetic corpus +
//! small-preset MLM pretraining), built lazily by whichever test first needs
//! it. Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

mod common;

use std::collections::BTreeMap;
use std::sync::LazyLock;
use std::time::Instant;

use common::{corpus_to_documents, dense_masked_attention};
use evlm::analysis::{
    adjusted_rand_index, embed_players, gmm_fit, pca_project, tsne_embed, GmmConfig, TsneConfig,
};
use evlm::model::{
    build_attention_pattern, windowed_attention, EncoderWeights, ModelConfig, Preset,
};
use evlm::pipeline::{filter_and_map, sessionize, split_train_val, FilterSpec, PlayerDocument};
use evlm::synth::{generate_corpus, separated_four, GeneratedCorpus, GeneratorConfig};
use evlm::tensor::{grad_check, Tensor};
use evlm::tokenizer::{apply_mlm_mask, MaskedToken, TokenSequence, Vocabulary};
use evlm::train::{evaluate, train, EvalOptions, TrainConfig, TrainOutputs, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRAIN_BUDGET_SECONDS: f64 = 2.0 * 3600.0;
const END_TO_END_BUDGET_SECONDS: f64 = 4.0 * 3600.0;

struct Fixture {
    corpus: GeneratedCorpus,
    documents: Vec<PlayerDocument>,
    val_docs: Vec<PlayerDocument>,
    vocab: Vocabulary,
    weights: EncoderWeights,
    report: TrainReport,
    truth_labels: Vec<usize>,
    build_seconds: f64,
}

static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let started = Instant::now();
    let config = GeneratorConfig::new(separated_four(), 400, 10, 7);
    let corpus = generate_corpus(&config).expect("generate fixture corpus");
    let documents = corpus_to_documents(&corpus, 15);

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

    let (train_docs, val_docs) = split_train_val(documents.clone(), 0.67, 7).expect("split");
    let texts: Vec<&str> = train_docs.iter().map(|d| d.text.as_str()).collect();
    let vocab = Vocabulary::build(texts.iter().copied(), 1);

    // Table-row-one preset; desk-scale protocol uses a larger fixed learning
    // rate than the paper's full-scale run and no dropout, documented in the
    // README. Training stops as soon as the targets are met.
    let model_config = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::preset(Preset::Small, vocab.len())
    };
    let mut weights = EncoderWeights::init(model_config, 7).expect("init weights");
    let train_config = TrainConfig {
        epochs: 100,
        learning_rate: 2e-3,
        eval_every: 50,
        seed: 7,
        max_steps: Some(1400),
        target_accuracy: Some(0.60),
        target_perplexity: Some(3.3),
        ..TrainConfig::default()
    };
    let report = train(
        &mut weights,
        &train_docs,
        &val_docs,
        &vocab,
        &train_config,
        &TrainOutputs::default(),
    )
    .expect("fixture training");

    Fixture {
        corpus,
        documents,
        val_docs,
        vocab,
        weights,
        report,
        truth_labels,
        build_seconds: started.elapsed().as_secs_f64(),
    }
});

fn tiny_encoder_config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        hidden_layers: 1,
        heads: 1,
        hidden_dim: 8,
        block_size: 16,
        window: 4,
        dilation: 1,
        global_positions: vec![0],
        vocab_size,
        ff_multiplier: 2,
        dropout: 0.0,
        strict_window: false,
    }
}

#[test]
fn criterion_01_gradcheck_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = 1e-5;

    // matmul -> scalar
    let a = Tensor::randn(vec![5, 4], 0.7, &mut rng).with_grad();
    let b = Tensor::randn(vec![4, 6], 0.7, &mut rng).with_grad();
    let err = grad_check(&[a, b], step, |tape, ids| {
        let prod = tape.matmul(ids[0], ids[1])?;
        Ok(tape.sum_all(prod))
    })
    .unwrap();
    assert!(err < 1e-4, "matmul gradcheck {err}");

    // softmax over matmul, projected to a scalar
    let a = Tensor::randn(vec![3, 5], 0.7, &mut rng).with_grad();
    let b = Tensor::randn(vec![5, 4], 0.7, &mut rng).with_grad();
    let coeffs = std::rc::Rc::new((0..12).map(|i| ((i as f64) * 0.37).sin()).collect::<Vec<_>>());
    let err = grad_check(&[a, b], step, move |tape, ids| {
        let prod = tape.matmul(ids[0], ids[1])?;
        let soft = tape.softmax_rows(prod);
        tape.dot_const(soft, coeffs.clone())
    })
    .unwrap();
    assert!(err < 1e-4, "softmax/matmul gradcheck {err}");

    // layer norm with affine parameters
    let x = Tensor::randn(vec![4, 8], 1.2, &mut rng).with_grad();
    let g = Tensor::randn(vec![8], 0.4, &mut rng).with_grad();
    let bias = Tensor::randn(vec![8], 0.4, &mut rng).with_grad();
    let coeffs = std::rc::Rc::new((0..32).map(|i| ((i as f64) * 0.19).cos()).collect::<Vec<_>>());
    let err = grad_check(&[x, g, bias], step, move |tape, ids| {
        let y = tape.layer_norm(ids[0], ids[1], ids[2], 1e-5)?;
        tape.dot_const(y, coeffs.clone())
    })
    .unwrap();
    assert!(err < 1e-4, "layer norm gradcheck {err}");

    // gelu
    let x = Tensor::randn(vec![12], 1.5, &mut rng).with_grad();
    let err = grad_check(&[x], step, |tape, ids| {
        let y = tape.gelu(ids[0]);
        Ok(tape.sum_all(y))
    })
    .unwrap();
    assert!(err < 1e-4, "gelu gradcheck {err}");

    // masked cross-entropy
    let logits = Tensor::randn(vec![6, 7], 1.0, &mut rng).with_grad();
    let err = grad_check(&[logits], step, |tape, ids| {
        tape.cross_entropy_masked(
            ids[0],
            &[1, 2, 0, 6, 3, 5],
            &[true, false, true, true, false, true],
        )
    })
    .unwrap();
    assert!(err < 1e-4, "cross entropy gradcheck {err}");

    // banded attention with a global position and padding
    let n = 9;
    let validity: Vec<bool> = (0..n).map(|i| i < 7).collect();
    let pattern = build_attention_pattern(n, 4, 2, &[0], &validity, false).unwrap();
    let keysets = pattern.keysets();
    let q = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let k = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let v = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let coeffs = std::rc::Rc::new((0..n * 8).map(|i| ((i as f64) * 0.11).sin()).collect::<Vec<_>>());
    let err = grad_check(&[q, k, v], step, move |tape, ids| {
        let out = tape.windowed_attention(ids[0], ids[1], ids[2], 2, keysets.clone(), 0.5)?;
        tape.dot_const(out, coeffs.clone())
    })
    .unwrap();
    assert!(err < 1e-4, "windowed attention gradcheck {err}");

    // full encoder block: embeddings through MLM loss at n = 16
    let config = tiny_encoder_config(8);
    let weights = EncoderWeights::init(config, 3).unwrap();
    let ids: Vec<u32> = (0..16).map(|i| 2 + (i % 6) as u32).collect();
    let valid = vec![true; 16];
    let targets: Vec<u32> = (0..16).map(|i| (5 + i % 3) as u32).collect();
    let mask: Vec<bool> = (0..16).map(|i| i % 2 == 1).collect();
    let inputs: Vec<Tensor> = (0..weights.n_params()).map(|i| weights.param(i).clone()).collect();
    let names = weights.names().to_vec();
    let cfg = weights.config.clone();
    let err = grad_check(&inputs, step, move |tape, vids| {
        // rebuild the encoder on the driven tape through the public surface:
        // a scratch weights object wired to the tape values
        encoder_loss_on_tape(tape, &cfg, &names, vids, &ids, &valid, &targets, &mask)
    })
    .unwrap();
    assert!(err < 1e-4, "full encoder gradcheck {err}");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "gradcheck suite took {elapsed}s");
    println!("ACCEPTANCE 01 gradcheck_suite: PASS (max paths < 1e-4, {elapsed:.1}s)");
}

/// Rebuilds the encoder forward + MLM loss for gradcheck purposes using the
/// tape-registered parameter values. Mirrors the shapes of
/// `EncoderWeights::init` through the parameter name list.
#[allow(clippy::too_many_arguments)]
fn encoder_loss_on_tape(
    tape: &mut evlm::tensor::Tape,
    config: &ModelConfig,
    names: &[String],
    vids: &[evlm::tensor::ValueId],
    ids: &[u32],
    valid: &[bool],
    targets: &[u32],
    mask: &[bool],
) -> evlm::Result<evlm::tensor::ValueId> {
    use std::rc::Rc;
    let by_name: BTreeMap<&str, evlm::tensor::ValueId> = names
        .iter()
        .map(|n| n.as_str())
        .zip(vids.iter().copied())
        .collect();
    let p = |name: &str| by_name[name];
    let n = ids.len();
    let pattern = build_attention_pattern(
        n,
        config.window,
        config.dilation,
        &config.global_positions,
        valid,
        false,
    )?;
    let scale = 1.0 / (config.head_dim() as f64).sqrt();

    let tok = tape.gather(p("emb.tok"), Rc::new(ids.to_vec()))?;
    let pos = tape.gather(p("emb.pos"), Rc::new((0..n as u32).collect()))?;
    let mut x = tape.add(tok, pos)?;
    for layer in 0..config.hidden_layers {
        let lp = |suffix: &str| p(&format!("layer.{layer}.{suffix}"));
        let linear = |tape: &mut evlm::tensor::Tape, x, w: &str, b: &str| -> evlm::Result<_> {
            let prod = tape.matmul(x, lp(w))?;
            tape.add_row_broadcast(prod, lp(b))
        };
        let q = linear(tape, x, "attn.wq", "attn.bq")?;
        let k = linear(tape, x, "attn.wk", "attn.bk")?;
        let v = linear(tape, x, "attn.wv", "attn.bv")?;
        let attn = tape.windowed_attention(q, k, v, config.heads, pattern.keysets(), scale)?;
        let proj = linear(tape, attn, "attn.wo", "attn.bo")?;
        let res1 = tape.add(x, proj)?;
        x = tape.layer_norm(res1, lp("ln1.gain"), lp("ln1.bias"), 1e-5)?;
        let inner = linear(tape, x, "ff.w1", "ff.b1")?;
        let act = tape.gelu(inner);
        let ff = linear(tape, act, "ff.w2", "ff.b2")?;
        let res2 = tape.add(x, ff)?;
        x = tape.layer_norm(res2, lp("ln2.gain"), lp("ln2.bias"), 1e-5)?;
    }
    let scores = tape.matmul_bt(x, p("emb.tok"))?;
    let logits = tape.add_row_broadcast(scores, p("head.bias"))?;
    tape.cross_entropy_masked(logits, targets, mask)
}

#[test]
fn criterion_02_attention_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=128);
        let w = 2 * rng.gen_range(1..=32);
        let d = rng.gen_range(1..=4);
        let n_globals = rng.gen_range(0..=2);
        let globals: Vec<usize> = (0..n_globals).map(|_| rng.gen_range(0..n)).collect();
        let pad_tail = if rng.gen_bool(0.3) { rng.gen_range(0..n) } else { 0 };
        let validity: Vec<bool> = (0..n).map(|i| i < n - pad_tail).collect();
        let heads = if rng.gen_bool(0.5) { 1 } else { 2 };

        let pattern = build_attention_pattern(n, w, d, &globals, &validity, false).unwrap();
        let model_dim = heads * 8;
        let q = Tensor::randn(vec![n, model_dim], 1.0, &mut rng);
        let k = Tensor::randn(vec![n, model_dim], 1.0, &mut rng);
        let v = Tensor::randn(vec![n, model_dim], 1.0, &mut rng);
        let banded = windowed_attention(&q, &k, &v, heads, &pattern).unwrap();
        let dense = dense_masked_attention(&q, &k, &v, heads, &pattern);
        for (x, y) in banded.data().iter().zip(dense.data()) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-6, "max abs diff {worst}");
    println!("ACCEPTANCE 02 attention_oracle: PASS (200 configs, max abs diff {worst:.2e})");
}

#[test]
fn criterion_03_linear_scaling() {
    let count = |n: usize| {
        build_attention_pattern(n, 64, 1, &[0], &vec![true; n], false)
            .unwrap()
            .pair_count()
    };
    let counts: Vec<(usize, usize)> = [256usize, 512, 1024, 2048]
        .iter()
        .map(|&n| (n, count(n)))
        .collect();
    for pair in counts.windows(2) {
        let (n, c1) = pair[0];
        let (n2, c2) = pair[1];
        let ratio = c2 as f64 / c1 as f64;
        assert!(ratio <= 2.1, "count({n2})/count({n}) = {ratio}");
        // dense attention would quadruple
        assert!(ratio < 4.0);
    }
    println!(
        "ACCEPTANCE 03 linear_scaling: PASS (pair counts {:?})",
        counts.iter().map(|(_, c)| *c).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_04_metric_identity() {
    // spot anchor from the published metrics table
    assert!((0.149f64.exp() - 1.161).abs() < 5e-4);

    let fixture = &*FIXTURE;
    // every recorded evaluation pass obeys the exact relation
    for eval in &fixture.report.evals {
        assert!(
            eval.metrics.identity_error() < 1e-9,
            "step {}: identity error {}",
            eval.step,
            eval.metrics.identity_error()
        );
    }
    assert!(fixture.report.final_metrics.identity_error() < 1e-9);
    // fresh passes under different masking seeds
    for seed in [3, 99] {
        let metrics = evaluate(
            &fixture.weights,
            &fixture.vocab,
            &fixture.val_docs,
            &EvalOptions { mask_seed: seed, ..EvalOptions::default() },
        )
        .unwrap();
        assert!(metrics.identity_error() < 1e-9);
    }
    println!("ACCEPTANCE 04 metric_identity: PASS (perplexity == exp(cross-entropy) within 1e-9)");
}

#[test]
fn criterion_05_desk_scale_training() {
    let fixture = &*FIXTURE;
    assert!(
        fixture.corpus.total_sessions() >= 2000,
        "corpus has only {} sessions",
        fixture.corpus.total_sessions()
    );
    assert!(fixture.vocab.len() <= 512, "vocab {} exceeds 512", fixture.vocab.len());
    let m = &fixture.report.final_metrics;
    assert!(
        m.accuracy >= 0.60,
        "masked accuracy {:.4} below 0.60 after {} steps",
        m.accuracy,
        fixture.report.steps.len()
    );
    assert!(m.perplexity <= 3.3, "perplexity {:.4} above 3.3", m.perplexity);
    assert!(
        fixture.report.wall_seconds <= TRAIN_BUDGET_SECONDS,
        "training took {:.0}s",
        fixture.report.wall_seconds
    );
    println!(
        "ACCEPTANCE 05 desk_scale_training: PASS (accuracy {:.3}, perplexity {:.3}, {:.0}s, {} sessions, vocab {})",
        m.accuracy,
        m.perplexity,
        fixture.report.wall_seconds,
        fixture.corpus.total_sessions(),
        fixture.vocab.len()
    );
}

#[test]
fn criterion_06_gradient_accumulation_equivalence() {
    let config = GeneratorConfig::new(separated_four(), 24, 3, 21);
    let corpus = generate_corpus(&config).unwrap();
    let documents = corpus_to_documents(&corpus, 15);
    let texts: Vec<&str> = documents.iter().map(|d| d.text.as_str()).collect();
    let vocab = Vocabulary::build(texts.iter().copied(), 1);
    let model_config = ModelConfig {
        hidden_layers: 2,
        heads: 2,
        hidden_dim: 32,
        block_size: 256,
        window: 16,
        dilation: 1,
        global_positions: vec![0],
        vocab_size: vocab.len(),
        ff_multiplier: 2,
        dropout: 0.0,
        strict_window: false,
    };
    let run = |micro: usize, accum: usize| -> Vec<Vec<f64>> {
        let mut weights = EncoderWeights::init(model_config.clone(), 5).unwrap();
        let train_config = TrainConfig {
            epochs: 1,
            micro_batch: micro,
            accumulation: accum,
            learning_rate: 1e-3,
            max_steps: Some(1),
            eval_every: 0,
            seed: 9,
            ..TrainConfig::default()
        };
        train(&mut weights, &documents, &documents, &vocab, &train_config, &TrainOutputs::default())
            .unwrap();
        (0..weights.n_params()).map(|i| weights.param(i).data().to_vec()).collect()
    };
    let accumulated = run(4, 4);
    let single = run(16, 1);
    let mut max_diff = 0.0f64;
    for (a, b) in accumulated.iter().zip(&single) {
        for (x, y) in a.iter().zip(b) {
            max_diff = max_diff.max((x - y).abs());
        }
    }
    assert!(max_diff < 1e-10, "parameter diff {max_diff}");
    println!("ACCEPTANCE 06 gradient_accumulation_equivalence: PASS (max diff {max_diff:.2e})");
}

#[test]
fn criterion_07_sessionization_properties() {
    // 1,000 randomized event streams
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for case in 0..1000 {
        let len = rng.gen_range(1..150);
        let gap_minutes = rng.gen_range(1..=45u64);
        let gap_ms = gap_minutes as i64 * 60_000;
        let mut stamps: Vec<i64> = (0..len)
            .map(|_| rng.gen_range(0..200_000_000i64))
            .collect();
        let sessions = sessionize("p", stamps.clone(), gap_minutes);

        stamps.sort();
        let flat: Vec<i64> = sessions.iter().flat_map(|s| s.events.iter().copied()).collect();
        assert_eq!(flat, stamps, "coverage violated in case {case}");
        for s in &sessions {
            for pair in s.events.windows(2) {
                assert!(pair[1] - pair[0] <= gap_ms, "gap bound violated in case {case}");
            }
        }
        for pair in sessions.windows(2) {
            assert!(
                pair[1].start_ms - pair[0].end_ms > gap_ms,
                "boundary bound violated in case {case}"
            );
        }
    }

    // recovered sessions match the generator's ground truth exactly
    let fixture = &*FIXTURE;
    let mut by_player: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for event in &fixture.corpus.events {
        by_player.entry(event.player_id.as_str()).or_default().push(event.ts_ms);
    }
    for truth in &fixture.corpus.truth {
        let stamps = by_player.remove(truth.player_id.as_str()).unwrap_or_default();
        let sessions = sessionize(&truth.player_id, stamps, 15);
        let recovered: Vec<(i64, i64, usize)> = sessions
            .iter()
            .map(|s| (s.start_ms, s.end_ms, s.events.len()))
            .collect();
        assert_eq!(recovered, truth.sessions, "player {}", truth.player_id);
    }
    println!("ACCEPTANCE 07 sessionization_properties: PASS (1000 streams + exact generator match)");
}

#[test]
fn criterion_08_masking_statistics() {
    let vocab = Vocabulary::build(["a b c d e f g h i j k l"], 1);
    let ids: Vec<u32> = (0..1200).map(|i| 5 + (i % 12) as u32).collect();
    let mut with_specials = vec![2u32]; // [CLS]
    with_specials.extend(&ids);
    with_specials.push(3); // [SEP]
    let seq = TokenSequence {
        valid: vec![true; with_specials.len()],
        ids: with_specials,
        labels: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    let mut selected = 0usize;
    let (mut masked, mut corrupted, mut unchanged) = (0usize, 0usize, 0usize);
    let rounds = 100;
    for _ in 0..rounds {
        let (out, outcomes) = apply_mlm_mask(&seq, &vocab, 0.15, &mut rng);
        let labels = out.labels.as_ref().unwrap();
        assert!(labels[0].is_none(), "[CLS] was selected");
        assert!(labels[labels.len() - 1].is_none(), "[SEP] was selected");
        for outcome in outcomes.into_iter().flatten() {
            selected += 1;
            match outcome {
                MaskedToken::Masked => masked += 1,
                MaskedToken::Corrupted => corrupted += 1,
                MaskedToken::Unchanged => unchanged += 1,
            }
        }
    }
    let candidates = (rounds * 1200) as f64;
    assert!(candidates >= 1e5);
    let rate = selected as f64 / candidates;
    assert!((rate - 0.15).abs() < 0.01, "selection rate {rate}");
    let frac = |x: usize| x as f64 / selected as f64;
    assert!((frac(masked) - 0.8).abs() < 0.02, "mask fraction {}", frac(masked));
    assert!((frac(corrupted) - 0.1).abs() < 0.02, "corrupt fraction {}", frac(corrupted));
    assert!((frac(unchanged) - 0.1).abs() < 0.02, "unchanged fraction {}", frac(unchanged));
    println!(
        "ACCEPTANCE 08 masking_statistics: PASS (rate {rate:.4}, split {:.3}/{:.3}/{:.3})",
        frac(masked),
        frac(corrupted),
        frac(unchanged)
    );
}

#[test]
fn criterion_09_archetype_recovery() {
    let started = Instant::now();
    let fixture = &*FIXTURE;
    let matrix = embed_players(&fixture.weights, &fixture.vocab, &fixture.documents).unwrap();
    assert_eq!(matrix.n_players(), 400);

    let pca = pca_project(&matrix.data, matrix.n_players(), matrix.dim, 50).unwrap();
    let tsne = tsne_embed(
        &pca.projected,
        matrix.n_players(),
        50,
        &TsneConfig { seed: 7, ..TsneConfig::default() },
    )
    .unwrap();
    assert!(tsne.final_kl < tsne.initial_kl);

    let gmm = gmm_fit(
        &tsne.coords,
        matrix.n_players(),
        2,
        &GmmConfig { k: 4, seed: 7, restarts: 10, ..GmmConfig::default() },
    )
    .unwrap();
    let ari = adjusted_rand_index(&gmm.assignments, &fixture.truth_labels);
    let total = fixture.build_seconds + started.elapsed().as_secs_f64();
    assert!(ari >= 0.7, "adjusted Rand index {ari:.4} below 0.7");
    assert!(total <= END_TO_END_BUDGET_SECONDS, "end-to-end took {total:.0}s");

    // each cluster's fingerprint must lead with the event class its majority
    // archetype emits most
    let fingerprints =
        evlm::analysis::cluster_fingerprint(&gmm.assignments, &fixture.documents, 4, 3);
    let archetype_top_class: BTreeMap<String, String> = separated_four()
        .iter()
        .map(|mix| {
            let top = mix
                .archetype
                .class_weights
                .iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(class, _)| class.clone())
                .unwrap();
            (mix.archetype.name.clone(), top)
        })
        .collect();
    for fp in &fingerprints {
        if fp.size == 0 {
            continue;
        }
        // majority ground-truth archetype among this cluster's members
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for (player, &assigned) in gmm.assignments.iter().enumerate() {
            if assigned == fp.cluster {
                *votes.entry(fixture.corpus.truth[player].archetype.as_str()).or_insert(0) += 1;
            }
        }
        let majority = votes.iter().max_by_key(|(_, &count)| count).map(|(name, _)| *name).unwrap();
        let expected_class = archetype_top_class[majority].as_str();
        let top_class = fp
            .histogram
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(class, _)| class.as_str())
            .unwrap();
        assert_eq!(
            top_class, expected_class,
            "cluster {} (majority {majority}) leads with {top_class}",
            fp.cluster
        );
    }
    println!("ACCEPTANCE 09 archetype_recovery: PASS (ARI {ari:.3}, {total:.0}s end to end)");
}

#[test]
fn criterion_10_em_monotonicity_and_tsne_kl() {
    // 100 seeded GMM runs, log-likelihood never decreases
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(77).wrapping_add(5));
        let n = 120;
        let mut x = Vec::with_capacity(n * 2);
        for i in 0..n {
            let center = (i % 3) as f64 * 6.0;
            x.push(center + rng.gen_range(-1.0..1.0));
            x.push(-center + rng.gen_range(-1.0..1.0));
        }
        let fit = gmm_fit(
            &x,
            n,
            2,
            &GmmConfig { k: 3, seed, restarts: 1, max_iters: 60, ..GmmConfig::default() },
        )
        .unwrap();
        for pair in fit.log_likelihood_history.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "seed {seed}: log-likelihood fell {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    // t-SNE KL decreases on every run
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let n = 100;
        let x: Vec<f64> = (0..n * 8)
            .map(|i| rng.gen_range(-1.0..1.0) + if i % 8 == 0 { (i / 8 % 2) as f64 * 8.0 } else { 0.0 })
            .collect();
        let result = tsne_embed(
            &x,
            n,
            8,
            &TsneConfig { perplexity: 12.0, iters: 300, seed, ..TsneConfig::default() },
        )
        .unwrap();
        assert!(
            result.final_kl < result.initial_kl,
            "seed {seed}: KL {} -> {}",
            result.initial_kl,
            result.final_kl
        );
    }
    println!("ACCEPTANCE 10 em_monotonicity_and_tsne_kl: PASS (100 GMM runs, 8 t-SNE runs)");
}

#[test]
fn criterion_11_noise_harness() {
    let fixture = &*FIXTURE;
    let mut means = BTreeMap::new();
    for &noise_p in &[0.0, 0.25, 0.5] {
        let mut accs = Vec::new();
        for seed in 0..3u64 {
            let metrics = evaluate(
                &fixture.weights,
                &fixture.vocab,
                &fixture.val_docs,
                &EvalOptions {
                    mask_rate: 0.15,
                    mask_seed: 100 + seed,
                    noise_p,
                    noise_seed: 200 + seed,
                },
            )
            .unwrap();
            assert!(metrics.masked_positions > 0);
            assert!(metrics.identity_error() < 1e-9);
            accs.push(metrics.accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        means.insert(format!("{noise_p}"), mean);
    }
    let clean = means["0"];
    let noisy = means["0.5"];
    assert!(
        clean >= noisy - 0.02,
        "accuracy at p=0 ({clean:.4}) fell more than 0.02 below p=0.5 ({noisy:.4})"
    );
    println!(
        "ACCEPTANCE 11 noise_harness: PASS (mean accuracy p=0: {clean:.4}, p=0.25: {:.4}, p=0.5: {noisy:.4})",
        means["0.25"]
    );
}

#[test]
fn criterion_12_preprocessing_reduction() {
    let fixture = &*FIXTURE;
    let outcome = filter_and_map(&fixture.corpus.events, &FilterSpec::bundled());
    let reduction = outcome.reduction_ratio();
    assert!(reduction >= 0.90, "field reduction {reduction:.4} below 0.90");
    assert_eq!(outcome.dropped_unknown_class, 0);
    println!(
        "ACCEPTANCE 12 preprocessing_reduction: PASS ({:.1}% of fields removed)",
        reduction * 100.0
    );
}
