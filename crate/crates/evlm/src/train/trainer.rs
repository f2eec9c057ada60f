//! The MLM pretraining loop.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{AdamW, GradAccum};
use super::metrics::{evaluate, EvalOptions, MetricsReport};
use crate::error::{Error, Result};
use crate::model::{encoder_forward, mlm_logits, EncoderWeights, ForwardMode};
use crate::pipeline::PlayerDocument;
use crate::tokenizer::{apply_mlm_mask, TokenSequence, Vocabulary};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub micro_batch: usize,
    /// Gradient-accumulation steps; effective batch is micro_batch * accumulation.
    pub accumulation: usize,
    /// Fixed throughout training; no warmup or decay.
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub mask_rate: f64,
    pub seed: u64,
    /// Evaluate (and checkpoint) every this many steps; 0 means only at the end.
    pub eval_every: usize,
    pub eval_mask_seed: u64,
    /// Hard cap on optimizer steps, on top of the epoch budget.
    pub max_steps: Option<usize>,
    /// Stop once an evaluation reaches all the set targets.
    pub target_accuracy: Option<f64>,
    pub target_perplexity: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            micro_batch: 4,
            accumulation: 4,
            learning_rate: 2e-5,
            weight_decay: 1e-2,
            mask_rate: 0.15,
            seed: 0,
            eval_every: 50,
            eval_mask_seed: 1,
            max_steps: None,
            target_accuracy: None,
            target_perplexity: None,
        }
    }
}

impl TrainConfig {
    pub fn effective_batch(&self) -> usize {
        self.micro_batch * self.accumulation
    }

    pub fn validate(&self) -> Result<()> {
        if self.micro_batch == 0 || self.accumulation == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "train config: epochs, micro_batch, accumulation must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::Config(format!("mask rate {} out of [0, 1]", self.mask_rate)));
        }
        Ok(())
    }
}

/// Optional file outputs written while training runs.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    /// Append-only CSV: step,loss,accuracy,cross_entropy,perplexity.
    pub metrics_csv: Option<PathBuf>,
    /// Checkpoints written at eval cadence plus `final.b2v` at the end.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalRecord {
    pub step: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, serde::Serialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    pub final_metrics: MetricsReport,
    pub stopped_at_target: bool,
    pub wall_seconds: f64,
}

fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ItemGrads {
    grads: Vec<Option<Vec<f64>>>,
    nll_sum: f64,
}

/// Runs MLM pretraining over the train split, evaluating on the validation
/// split at the configured cadence. Step order, masking, and dropout all
/// derive from the config seed, and gradient accumulation folds items in
/// batch order, so a run is reproducible and the micro-batch size never
/// changes the numbers.
pub fn train(
    weights: &mut EncoderWeights,
    train_docs: &[PlayerDocument],
    val_docs: &[PlayerDocument],
    vocab: &Vocabulary,
    config: &TrainConfig,
    outputs: &TrainOutputs,
) -> Result<TrainReport> {
    config.validate()?;
    if train_docs.is_empty() {
        return Err(Error::EmptyInput("train split"));
    }
    let started = Instant::now();
    let block = weights.config.block_size;
    let sequences: Vec<TokenSequence> = train_docs
        .par_iter()
        .map(|d| vocab.encode(&d.text, block).trimmed())
        .filter(|s| !s.is_empty())
        .collect();
    if sequences.is_empty() {
        return Err(Error::EmptyInput("train split after encoding"));
    }

    let mut csv = open_csv(outputs)?;
    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay, weights);
    let mut grads = GradAccum::new(weights);
    let eval_options = EvalOptions {
        mask_rate: config.mask_rate,
        mask_seed: config.eval_mask_seed,
        ..EvalOptions::default()
    };

    let mut report = TrainReport {
        steps: Vec::new(),
        evals: Vec::new(),
        final_metrics: MetricsReport::from_counts(0, f64::ln(1.0), 1, 0),
        stopped_at_target: false,
        wall_seconds: 0.0,
    };
    let mut step = 0usize;
    let effective = config.effective_batch();

    'training: for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..sequences.len()).collect();
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64, 0));
        order.shuffle(&mut epoch_rng);

        for chunk in order.chunks(effective) {
            step += 1;

            // Mask the whole effective batch up front so the total masked
            // count is known before any gradient seed is chosen; this is what
            // makes accumulation equivalent to one large batch.
            let mut batch: Vec<TokenSequence> = Vec::with_capacity(chunk.len());
            let mut masked_counts: Vec<usize> = Vec::with_capacity(chunk.len());
            for (pos, &doc_idx) in chunk.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    step as u64,
                    pos as u64 + 1,
                ));
                let (masked, _) =
                    apply_mlm_mask(&sequences[doc_idx], vocab, config.mask_rate, &mut rng);
                let count = masked
                    .labels
                    .as_ref()
                    .map_or(0, |l| l.iter().filter(|x| x.is_some()).count());
                masked_counts.push(count);
                batch.push(masked);
            }
            let total_masked: usize = masked_counts.iter().sum();
            if total_masked == 0 {
                continue;
            }

            let mut loss_sum = 0.0f64;
            for (wave_idx, wave) in batch.chunks(config.micro_batch).enumerate() {
                let wave_offset = wave_idx * config.micro_batch;
                let results: Vec<Result<Option<ItemGrads>>> = wave
                    .par_iter()
                    .enumerate()
                    .map(|(i, item)| {
                        let pos = wave_offset + i;
                        if masked_counts[pos] == 0 {
                            return Ok(None);
                        }
                        item_gradients(
                            weights,
                            item,
                            masked_counts[pos] as f64 / total_masked as f64,
                            derive_seed(config.seed, step as u64, 1000 + pos as u64),
                        )
                        .map(Some)
                    })
                    .collect();
                for result in results {
                    let Some(item) = result? else { continue };
                    loss_sum += item.nll_sum;
                    for (idx, grad) in item.grads.iter().enumerate() {
                        if let Some(g) = grad {
                            grads.add(idx, g);
                        }
                    }
                }
            }
            let loss = loss_sum / total_masked as f64;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step, loss });
            }
            optimizer.step(weights, &grads);
            grads.zero();
            report.steps.push(StepRecord { step, loss });

            let budget_done = config.max_steps.is_some_and(|m| step >= m);
            if (config.eval_every > 0 && step % config.eval_every == 0) || budget_done {
                let metrics = evaluate(weights, vocab, val_docs, &eval_options)?;
                log_eval(&mut csv, step, loss, &metrics)?;
                checkpoint(outputs, weights, &format!("step_{step:06}"))?;
                let hit_target = targets_met(config, &metrics);
                report.evals.push(EvalRecord { step, metrics });
                if hit_target {
                    report.stopped_at_target = true;
                    break 'training;
                }
                if budget_done {
                    break 'training;
                }
            }
        }
    }

    let final_metrics = evaluate(weights, vocab, val_docs, &eval_options)?;
    let last_loss = report.steps.last().map_or(f64::NAN, |s| s.loss);
    log_eval(&mut csv, step, last_loss, &final_metrics)?;
    checkpoint(outputs, weights, "final")?;
    report.final_metrics = final_metrics;
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Forward, masked cross-entropy, and backward for one sequence. The
/// backward seed folds this item's loss into the batch objective: the step
/// loss is sum(item NLL) / total masked, so each item backpropagates
/// d(loss)/d(item mean NLL) = item_count / total_count.
fn item_gradients(
    weights: &EncoderWeights,
    item: &TokenSequence,
    seed_fraction: f64,
    dropout_seed: u64,
) -> Result<ItemGrads> {
    let labels = item.labels.as_ref().expect("masked sequence has labels");
    let mut targets = vec![0u32; item.len()];
    let mut mask = vec![false; item.len()];
    for (i, label) in labels.iter().enumerate() {
        if let Some(id) = label {
            targets[i] = *id;
            mask[i] = true;
        }
    }
    let mut fwd = encoder_forward(
        weights,
        &item.ids,
        &item.valid,
        ForwardMode::Train { dropout_seed },
    )?;
    let logits = mlm_logits(&mut fwd)?;
    let loss = fwd.tape.cross_entropy_masked(logits, &targets, &mask)?;
    let mean_nll = fwd.tape.scalar(loss);
    let count = mask.iter().filter(|m| **m).count() as f64;
    fwd.tape.backward_seeded(loss, seed_fraction);
    let grads = (0..weights.n_params())
        .map(|i| fwd.param_grad(i).map(|g| g.to_vec()))
        .collect();
    Ok(ItemGrads { grads, nll_sum: mean_nll * count })
}

fn targets_met(config: &TrainConfig, metrics: &MetricsReport) -> bool {
    let acc_ok = config.target_accuracy.map_or(true, |t| metrics.accuracy >= t);
    let ppl_ok = config.target_perplexity.map_or(true, |t| metrics.perplexity <= t);
    (config.target_accuracy.is_some() || config.target_perplexity.is_some()) && acc_ok && ppl_ok
}

fn open_csv(outputs: &TrainOutputs) -> Result<Option<std::io::BufWriter<std::fs::File>>> {
    let Some(path) = &outputs.metrics_csv else {
        return Ok(None);
    };
    let new = !path.exists();
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = std::io::BufWriter::new(file);
    if new {
        writeln!(w, "step,loss,accuracy,cross_entropy,perplexity")?;
    }
    Ok(Some(w))
}

fn log_eval(
    csv: &mut Option<std::io::BufWriter<std::fs::File>>,
    step: usize,
    loss: f64,
    metrics: &MetricsReport,
) -> Result<()> {
    if let Some(w) = csv {
        writeln!(
            w,
            "{step},{loss},{},{},{}",
            metrics.accuracy, metrics.cross_entropy, metrics.perplexity
        )?;
        w.flush()?;
    }
    Ok(())
}

fn checkpoint(outputs: &TrainOutputs, weights: &EncoderWeights, name: &str) -> Result<()> {
    if let Some(dir) = &outputs.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        weights.save(&dir.join(format!("{name}.b2v")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::Rng;

    fn tiny_model(vocab_size: usize, seed: u64) -> EncoderWeights {
        let config = ModelConfig {
            hidden_layers: 1,
            heads: 2,
            hidden_dim: 16,
            block_size: 32,
            window: 6,
            dilation: 1,
            global_positions: vec![0],
            vocab_size,
            ff_multiplier: 2,
            dropout: 0.0,
            strict_window: false,
        };
        EncoderWeights::init(config, seed).unwrap()
    }

    fn patterned_docs(n: usize, seed: u64) -> Vec<PlayerDocument> {
        // highly regular bigram text the tiny model can learn quickly
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut words = Vec::new();
                for _ in 0..10 {
                    let pair = ["alpha beta", "gamma delta", "epsilon zeta"]
                        [rng.gen_range(0..3)];
                    words.push(pair);
                }
                PlayerDocument {
                    player_id: format!("p{i}"),
                    text: format!("[CLS] {} [SEP]", words.join(" ")),
                    session_offsets: vec![1],
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_training_leaves_weights_identical() {
        let docs = patterned_docs(8, 1);
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1);
        let mut weights = tiny_model(vocab.len(), 2);
        let before: Vec<Vec<f64>> =
            (0..weights.n_params()).map(|i| weights.param(i).data().to_vec()).collect();
        let config = TrainConfig {
            epochs: 2,
            learning_rate: 0.0,
            eval_every: 0,
            ..TrainConfig::default()
        };
        train(&mut weights, &docs, &docs, &vocab, &config, &TrainOutputs::default()).unwrap();
        for i in 0..weights.n_params() {
            assert_eq!(weights.param(i).data(), before[i].as_slice());
        }
    }

    #[test]
    fn training_reduces_loss_on_a_tiny_corpus() {
        let docs = patterned_docs(50, 3);
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1);
        let mut weights = tiny_model(vocab.len(), 4);
        let config = TrainConfig {
            epochs: 100,
            learning_rate: 3e-3,
            max_steps: Some(200),
            eval_every: 0,
            seed: 5,
            ..TrainConfig::default()
        };
        let report =
            train(&mut weights, &docs, &docs, &vocab, &config, &TrainOutputs::default()).unwrap();
        let first = report.steps.first().unwrap().loss;
        let last = report.steps.last().unwrap().loss;
        assert!(
            last < first * 0.7,
            "loss did not decrease: first {first}, last {last}"
        );
        assert!(report.final_metrics.identity_error() < 1e-9);
    }

    #[test]
    fn gradient_accumulation_matches_one_large_batch() {
        let docs = patterned_docs(16, 6);
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1);

        let run = |micro: usize, accum: usize| -> Vec<Vec<f64>> {
            let mut weights = tiny_model(vocab.len(), 7);
            let config = TrainConfig {
                epochs: 1,
                micro_batch: micro,
                accumulation: accum,
                learning_rate: 1e-3,
                max_steps: Some(1),
                eval_every: 0,
                seed: 8,
                ..TrainConfig::default()
            };
            train(&mut weights, &docs, &docs, &vocab, &config, &TrainOutputs::default()).unwrap();
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
    }

    #[test]
    fn metrics_csv_is_appended(){
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("metrics.csv");
        let docs = patterned_docs(8, 9);
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1);
        let mut weights = tiny_model(vocab.len(), 10);
        let config = TrainConfig {
            epochs: 1,
            max_steps: Some(2),
            eval_every: 1,
            ..TrainConfig::default()
        };
        let outputs = TrainOutputs {
            metrics_csv: Some(csv_path.clone()),
            checkpoint_dir: Some(dir.path().join("ckpt")),
        };
        train(&mut weights, &docs, &docs, &vocab, &config, &outputs).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "step,loss,accuracy,cross_entropy,perplexity");
        assert!(text.lines().count() >= 3);
        assert!(dir.path().join("ckpt").join("final.b2v").exists());
        assert!(dir.path().join("ckpt").join("final.b2v.json").exists());
    }

    #[test]
    fn early_stop_on_targets() {
        let docs = patterned_docs(30, 11);
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), 1);
        let mut weights = tiny_model(vocab.len(), 12);
        let config = TrainConfig {
            epochs: 500,
            learning_rate: 3e-3,
            eval_every: 20,
            target_accuracy: Some(0.4),
            target_perplexity: Some(10.0),
            seed: 13,
            ..TrainConfig::default()
        };
        let report =
            train(&mut weights, &docs, &docs, &vocab, &config, &TrainOutputs::default()).unwrap();
        assert!(report.stopped_at_target, "targets never reached");
        let last_eval = report.evals.last().unwrap();
        assert!(last_eval.metrics.accuracy >= 0.4);
    }
}
