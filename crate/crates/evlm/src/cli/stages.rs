//! Stage implementations for the pipeline subcommands.

use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::manifest::RunManifest;
use crate::analysis::{
    cluster_fingerprint, embed_players, gmm_fit, load_embeddings, pca_project, render_cluster_svg,
    save_embeddings, tsne_embed, write_embeddings_csv, ClusterReport, GmmConfig, TsneConfig,
};
use crate::error::{Error, Result};
use crate::model::{EncoderWeights, ModelConfig, Preset};
use crate::pipeline::{
    filter_and_map, inject_order_noise, load_documents, parse_events, render_document, sessionize,
    split_train_val, write_documents, FilterSpec, PlayerDocument,
};
use crate::synth::{default_seven, generate_corpus, separated_four, GeneratorConfig};
use crate::tokenizer::Vocabulary;
use crate::train::{evaluate, train, EvalOptions, TrainConfig, TrainOutputs};

/// Tracks written outputs so a failed stage never leaves partial artifacts.
struct Stage {
    manifest: RunManifest,
    written: Vec<(String, PathBuf)>,
    manifest_path: PathBuf,
}

impl Stage {
    fn begin(name: &str, seed: Option<u64>, config: serde_json::Value, out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            manifest: RunManifest::new(name, seed, config),
            written: Vec::new(),
            manifest_path: out_dir.join(format!("manifest_{name}.json")),
        })
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.manifest.record_input(name, path);
    }

    fn wrote(&mut self, name: &str, path: &Path) {
        self.written.push((name.to_string(), path.to_path_buf()));
    }

    /// Attaches extra resolved values (stats, derived settings) to the
    /// manifest config before it is written.
    fn annotate(&mut self, key: &str, value: serde_json::Value) {
        self.manifest.config[key] = value;
    }

    fn finish<T>(mut self, result: Result<T>) -> Result<(T, RunManifest)> {
        match result {
            Ok(value) => {
                for (name, path) in &self.written {
                    self.manifest.record_output(name, path)?;
                }
                self.manifest.write_atomic(&self.manifest_path)?;
                Ok((value, self.manifest))
            }
            Err(err) => {
                for (_, path) in &self.written {
                    let _ = std::fs::remove_file(path);
                }
                Err(err)
            }
        }
    }
}

// ── generate ─────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator config JSON; omitted means the bundled archetype set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled archetype set when no config file is given.
    #[arg(long, default_value = "default7", value_parser = ["default7", "separated4"])]
    pub archetypes: String,
    #[arg(long, default_value_t = 400)]
    pub players: usize,
    #[arg(long, default_value_t = 15)]
    pub days: u32,
    /// Overrides the config file's seed when both are given.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out/generate")]
    pub out_dir: PathBuf,
}

pub fn run_generate(args: &GenerateArgs) -> Result<RunManifest> {
    let config = match &args.config {
        Some(path) => {
            let mut cfg = GeneratorConfig::load(path)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            cfg
        }
        None => {
            let archetypes = match args.archetypes.as_str() {
                "separated4" => separated_four(),
                _ => default_seven(),
            };
            GeneratorConfig::new(archetypes, args.players, args.days, args.seed.unwrap_or(7))
        }
    };
    let mut stage = Stage::begin(
        "generate",
        Some(config.seed),
        serde_json::to_value(&config)?,
        &args.out_dir,
    )?;
    if let Some(path) = &args.config {
        stage.input("config", path);
    }

    let result = (|| {
        let corpus = generate_corpus(&config)?;
        let events_path = args.out_dir.join("events.jsonl");
        let labels_path = args.out_dir.join("labels.tsv");
        corpus.write_events_jsonl(BufWriter::new(std::fs::File::create(&events_path)?))?;
        stage.wrote("events", &events_path);
        corpus.write_labels_tsv(BufWriter::new(std::fs::File::create(&labels_path)?))?;
        stage.wrote("labels", &labels_path);
        println!(
            "generated {} events over {} sessions for {} players",
            corpus.events.len(),
            corpus.total_sessions(),
            corpus.truth.len()
        );
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── preprocess ───────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Raw events, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Filter spec JSON; omitted means the bundled spec.
    #[arg(long)]
    pub filter_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub gap_minutes: u64,
    /// Per-session probability of permuting event order.
    #[arg(long, default_value_t = 0.0)]
    pub noise_p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.67)]
    pub train_fraction: f64,
    #[arg(long, default_value = "out/preprocess")]
    pub out_dir: PathBuf,
}

pub fn run_preprocess(args: &PreprocessArgs) -> Result<RunManifest> {
    let spec = match &args.filter_spec {
        Some(path) => FilterSpec::load(path)?,
        None => FilterSpec::bundled(),
    };
    let mut stage = Stage::begin(
        "preprocess",
        Some(args.seed),
        serde_json::to_value(args)?,
        &args.out_dir,
    )?;
    stage.input("events", &args.input);
    if let Some(path) = &args.filter_spec {
        stage.input("filter_spec", path);
    }

    let result = (|| {
        let file = std::fs::File::open(&args.input).map_err(|e| Error::Format {
            path: args.input.display().to_string(),
            reason: format!("cannot open events file: {e}"),
        })?;
        let parsed = parse_events(std::io::BufReader::new(file))?;
        let filtered = filter_and_map(&parsed.events, &spec);
        let reduction = filtered.reduction_ratio();

        let mut by_player: BTreeMap<String, Vec<_>> = BTreeMap::new();
        for event in filtered.events {
            by_player.entry(event.player_id.clone()).or_default().push(event);
        }
        let mut documents = Vec::with_capacity(by_player.len());
        let mut sessions_total = 0usize;
        for (idx, (player_id, events)) in by_player.into_iter().enumerate() {
            let sessions = sessionize(&player_id, events, args.gap_minutes);
            sessions_total += sessions.len();
            let mut doc = render_document(&player_id, &sessions);
            if args.noise_p > 0.0 {
                let tokens = doc.tokens();
                let noisy = inject_order_noise(&tokens, args.noise_p, args.seed ^ (idx as u64) << 1);
                doc.text = noisy.join(" ");
            }
            documents.push(doc);
        }

        let docs_path = args.out_dir.join("documents.tsv");
        write_documents(BufWriter::new(std::fs::File::create(&docs_path)?), &documents)?;
        stage.wrote("documents", &docs_path);

        let (train_docs, val_docs) =
            split_train_val(documents, args.train_fraction, args.seed)?;
        let train_path = args.out_dir.join("train.tsv");
        let val_path = args.out_dir.join("val.tsv");
        write_documents(BufWriter::new(std::fs::File::create(&train_path)?), &train_docs)?;
        stage.wrote("train", &train_path);
        write_documents(BufWriter::new(std::fs::File::create(&val_path)?), &val_docs)?;
        stage.wrote("val", &val_path);

        println!(
            "parsed {} events ({} malformed), dropped {} unknown-class, field reduction {:.1}%",
            parsed.events.len(),
            parsed.malformed,
            filtered.dropped_unknown_class,
            reduction * 100.0
        );
        println!(
            "{} sessions over {} players -> {} train / {} val documents",
            sessions_total,
            train_docs.len() + val_docs.len(),
            train_docs.len(),
            val_docs.len()
        );
        stage.annotate(
            "stats",
            serde_json::json!({
                "reduction_ratio": reduction,
                "sessions": sessions_total,
                "malformed_lines": parsed.malformed,
            }),
        );
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── train ────────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Model size preset.
    #[arg(long, default_value = "small")]
    pub preset: String,
    /// Total sliding-window span.
    #[arg(long, default_value_t = 64)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub dilation: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4)]
    pub micro_batch: usize,
    #[arg(long, default_value_t = 4)]
    pub accumulation: usize,
    #[arg(long, default_value_t = 2e-5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.15)]
    pub mask_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub eval_every: usize,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Stop once validation accuracy reaches this.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    #[arg(long)]
    pub target_perplexity: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long, default_value = "out/train")]
    pub out_dir: PathBuf,
}

pub fn run_train(args: &TrainArgs) -> Result<RunManifest> {
    let preset: Preset = args.preset.parse()?;
    let mut stage = Stage::begin(
        "train",
        Some(args.seed),
        serde_json::to_value(args)?,
        &args.out_dir,
    )?;
    stage.input("train", &args.train);
    stage.input("val", &args.val);

    let metrics_path = args.out_dir.join("metrics.csv");
    let checkpoint_dir = args.out_dir.join("checkpoints");
    let result = (|| {
        let train_docs = load_documents(&args.train)?;
        let val_docs = load_documents(&args.val)?;
        let texts: Vec<&str> = train_docs.iter().map(|d| d.text.as_str()).collect();
        let vocab = Vocabulary::build(texts.iter().copied(), args.min_count);
        let vocab_path = args.out_dir.join("vocab.tsv");
        vocab.save(&vocab_path)?;
        stage.wrote("vocab", &vocab_path);

        let model_config = ModelConfig {
            window: args.window,
            dilation: args.dilation,
            dropout: args.dropout,
            ..ModelConfig::preset(preset, vocab.len())
        };
        let mut weights = EncoderWeights::init(model_config, args.seed)?;
        println!(
            "training {} preset: {} tensors, {} parameters, vocab {}",
            args.preset,
            weights.n_params(),
            weights.total_elements(),
            vocab.len()
        );

        let train_config = TrainConfig {
            epochs: args.epochs,
            micro_batch: args.micro_batch,
            accumulation: args.accumulation,
            learning_rate: args.learning_rate,
            weight_decay: args.weight_decay,
            mask_rate: args.mask_rate,
            seed: args.seed,
            eval_every: args.eval_every,
            eval_mask_seed: args.seed.wrapping_add(1),
            max_steps: args.max_steps,
            target_accuracy: args.target_accuracy,
            target_perplexity: args.target_perplexity,
        };
        let outputs = TrainOutputs {
            metrics_csv: Some(metrics_path.clone()),
            checkpoint_dir: Some(checkpoint_dir.clone()),
        };
        let report = train(&mut weights, &train_docs, &val_docs, &vocab, &train_config, &outputs)?;

        let summary_path = args.out_dir.join("summary.json");
        std::fs::write(&summary_path, serde_json::to_string_pretty(&report)?)?;
        stage.wrote("summary", &summary_path);
        stage.wrote("metrics", &metrics_path);
        stage.wrote("checkpoint", &checkpoint_dir.join("final.b2v"));
        stage.wrote("checkpoint_config", &checkpoint_dir.join("final.b2v.json"));

        let m = &report.final_metrics;
        println!(
            "finished after {} steps in {:.0}s: accuracy {:.4}, cross-entropy {:.4}, perplexity {:.4}",
            report.steps.len(),
            report.wall_seconds,
            m.accuracy,
            m.cross_entropy,
            m.perplexity
        );
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── eval ─────────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Weights written by the train stage (config sidecar expected next to it).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Documents to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub mask_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub mask_seed: u64,
    /// Ordering noise applied before encoding, for the noise harness.
    #[arg(long, default_value_t = 0.0)]
    pub noise_p: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, default_value = "out/eval")]
    pub out_dir: PathBuf,
}

pub fn run_eval(args: &EvalArgs) -> Result<RunManifest> {
    let mut stage = Stage::begin(
        "eval",
        Some(args.mask_seed),
        serde_json::to_value(args)?,
        &args.out_dir,
    )?;
    stage.input("checkpoint", &args.checkpoint);
    stage.input("vocab", &args.vocab);
    stage.input("data", &args.data);

    let result = (|| {
        let weights = EncoderWeights::load(&args.checkpoint)?;
        let vocab = Vocabulary::load(&args.vocab)?;
        let docs = load_documents(&args.data)?;
        let options = EvalOptions {
            mask_rate: args.mask_rate,
            mask_seed: args.mask_seed,
            noise_p: args.noise_p,
            noise_seed: args.noise_seed,
        };
        let report = evaluate(&weights, &vocab, &docs, &options)?;
        let summary_path = args.out_dir.join("eval_summary.json");
        std::fs::write(&summary_path, serde_json::to_string_pretty(&report)?)?;
        stage.wrote("summary", &summary_path);
        println!(
            "noise_p {:.2}: accuracy {:.4}, cross-entropy {:.4}, perplexity {:.4} over {} masked positions",
            args.noise_p, report.accuracy, report.cross_entropy, report.perplexity,
            report.masked_positions
        );
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── embed ────────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also write embeddings.csv next to the binary matrix.
    #[arg(long, default_value_t = false)]
    pub csv: bool,
    #[arg(long, default_value = "out/embed")]
    pub out_dir: PathBuf,
}

pub fn run_embed(args: &EmbedArgs) -> Result<RunManifest> {
    let mut stage = Stage::begin("embed", None, serde_json::to_value(args)?, &args.out_dir)?;
    stage.input("checkpoint", &args.checkpoint);
    stage.input("vocab", &args.vocab);
    stage.input("data", &args.data);

    let result = (|| {
        let weights = EncoderWeights::load(&args.checkpoint)?;
        let vocab = Vocabulary::load(&args.vocab)?;
        let docs = load_documents(&args.data)?;
        let matrix = embed_players(&weights, &vocab, &docs)?;
        let bin_path = args.out_dir.join("embeddings.bin");
        save_embeddings(&bin_path, &matrix)?;
        stage.wrote("embeddings", &bin_path);
        if args.csv {
            let csv_path = args.out_dir.join("embeddings.csv");
            write_embeddings_csv(BufWriter::new(std::fs::File::create(&csv_path)?), &matrix)?;
            stage.wrote("embeddings_csv", &csv_path);
        }
        println!("embedded {} players into {} dimensions", matrix.n_players(), matrix.dim);
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── cluster ──────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Documents file for event-class fingerprints.
    #[arg(long)]
    pub documents: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub pca_dims: usize,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub tsne_iters: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Cluster the 2-D t-SNE coordinates or the PCA projections directly.
    #[arg(long, default_value = "tsne", value_parser = ["tsne", "pca"])]
    pub space: String,
    #[arg(long, default_value_t = 3)]
    pub min_cluster_size: usize,
    #[arg(long, default_value = "out/cluster")]
    pub out_dir: PathBuf,
}

pub fn run_cluster(args: &ClusterArgs) -> Result<RunManifest> {
    let mut stage = Stage::begin(
        "cluster",
        Some(args.seed),
        serde_json::to_value(args)?,
        &args.out_dir,
    )?;
    stage.input("embeddings", &args.embeddings);
    if let Some(docs) = &args.documents {
        stage.input("documents", docs);
    }

    let result = (|| {
        let matrix = load_embeddings(&args.embeddings)?;
        let n = matrix.n_players();
        let pca = pca_project(&matrix.data, n, matrix.dim, args.pca_dims)?;
        let tsne_config = TsneConfig {
            perplexity: args.perplexity,
            iters: args.tsne_iters,
            seed: args.seed,
            ..TsneConfig::default()
        };
        let tsne = tsne_embed(&pca.projected, n, args.pca_dims, &tsne_config)?;
        println!(
            "t-SNE: KL {:.4} -> {:.4} over {} players",
            tsne.initial_kl, tsne.final_kl, n
        );

        let gmm_config = GmmConfig {
            k: args.k,
            seed: args.seed,
            restarts: args.restarts,
            ..GmmConfig::default()
        };
        let gmm = match args.space.as_str() {
            "pca" => gmm_fit(&pca.projected, n, args.pca_dims, &gmm_config)?,
            _ => gmm_fit(&tsne.coords, n, 2, &gmm_config)?,
        };
        for warning in &gmm.warnings {
            eprintln!("warning: {warning}");
        }

        let fingerprints = match &args.documents {
            Some(path) => {
                let docs = load_documents(path)?;
                let by_id: BTreeMap<&str, &PlayerDocument> =
                    docs.iter().map(|d| (d.player_id.as_str(), d)).collect();
                let ordered: Vec<PlayerDocument> = matrix
                    .player_ids
                    .iter()
                    .map(|id| {
                        by_id.get(id.as_str()).map(|d| (*d).clone()).ok_or_else(|| {
                            Error::Format {
                                path: path.display().to_string(),
                                reason: format!("no document for player {id}"),
                            }
                        })
                    })
                    .collect::<Result<_>>()?;
                cluster_fingerprint(&gmm.assignments, &ordered, args.k, args.min_cluster_size)
            }
            None => Vec::new(),
        };

        let report = ClusterReport {
            player_ids: matrix.player_ids.clone(),
            assignments: gmm.assignments.clone(),
            tsne_coords: tsne.coords.clone(),
            gmm,
            fingerprints,
        };

        let assignments_path = args.out_dir.join("assignments.csv");
        report.write_assignments_csv(BufWriter::new(std::fs::File::create(&assignments_path)?))?;
        stage.wrote("assignments", &assignments_path);
        let coords_path = args.out_dir.join("tsne.csv");
        report.write_coords_csv(BufWriter::new(std::fs::File::create(&coords_path)?))?;
        stage.wrote("coords", &coords_path);
        let summary_path = args.out_dir.join("cluster_summary.json");
        report.write_summary_json(&summary_path)?;
        stage.wrote("summary", &summary_path);
        let svg_path = args.out_dir.join("clusters.svg");
        std::fs::write(&svg_path, render_cluster_svg(&report.tsne_coords, &report.assignments, 800))?;
        stage.wrote("scatter", &svg_path);

        println!("clustered {n} players into {} components", args.k);
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}

// ── report ───────────────────────────────────────────────────────────

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub train_summary: Option<PathBuf>,
    #[arg(long)]
    pub eval_summary: Option<PathBuf>,
    #[arg(long)]
    pub cluster_summary: Option<PathBuf>,
    #[arg(long, default_value = "out/report")]
    pub out_dir: PathBuf,
}

pub fn run_report(args: &ReportArgs) -> Result<RunManifest> {
    let mut stage = Stage::begin("report", None, serde_json::to_value(args)?, &args.out_dir)?;
    let result = (|| {
        let mut doc = String::from("# Pipeline report\n");
        if let Some(path) = &args.train_summary {
            stage.input("train_summary", path);
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let m = &v["final_metrics"];
            doc.push_str("\n## Training\n\n");
            doc.push_str(&format!(
                "- steps: {}\n- wall seconds: {:.0}\n- masked accuracy: {:.4}\n- cross-entropy: {:.4}\n- perplexity: {:.4}\n",
                v["steps"].as_array().map_or(0, |s| s.len()),
                v["wall_seconds"].as_f64().unwrap_or(f64::NAN),
                m["accuracy"].as_f64().unwrap_or(f64::NAN),
                m["cross_entropy"].as_f64().unwrap_or(f64::NAN),
                m["perplexity"].as_f64().unwrap_or(f64::NAN),
            ));
        }
        if let Some(path) = &args.eval_summary {
            stage.input("eval_summary", path);
            let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            doc.push_str("\n## Evaluation\n\n");
            doc.push_str(&format!(
                "- masked accuracy: {:.4}\n- cross-entropy: {:.4}\n- perplexity: {:.4}\n- masked positions: {}\n",
                m["accuracy"].as_f64().unwrap_or(f64::NAN),
                m["cross_entropy"].as_f64().unwrap_or(f64::NAN),
                m["perplexity"].as_f64().unwrap_or(f64::NAN),
                m["masked_positions"].as_u64().unwrap_or(0),
            ));
        }
        if let Some(path) = &args.cluster_summary {
            stage.input("cluster_summary", path);
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            doc.push_str("\n## Clusters\n\n");
            doc.push_str(&format!(
                "- players: {}\n- components: {}\n- log-likelihood: {:.2}\n",
                v["players"].as_u64().unwrap_or(0),
                v["k"].as_u64().unwrap_or(0),
                v["log_likelihood"].as_f64().unwrap_or(f64::NAN),
            ));
            if let Some(fps) = v["fingerprints"].as_array() {
                doc.push_str("\n| cluster | size | top classes |\n|---|---|---|\n");
                for fp in fps {
                    let mut entries: Vec<(String, f64)> = fp["histogram"]
                        .as_object()
                        .map(|h| {
                            h.iter()
                                .map(|(k, v)| (k.clone(), v.as_f64().unwrap_or(0.0)))
                                .collect()
                        })
                        .unwrap_or_default();
                    entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                    let tops: Vec<String> = entries
                        .iter()
                        .take(3)
                        .map(|(k, v)| format!("{k} {:.0}%", v * 100.0))
                        .collect();
                    let flag = if fp["below_min_size"].as_bool().unwrap_or(false) {
                        " (below min size)"
                    } else {
                        ""
                    };
                    doc.push_str(&format!(
                        "| {}{flag} | {} | {} |\n",
                        fp["cluster"],
                        fp["size"],
                        tops.join(", ")
                    ));
                }
            }
        }
        let report_path = args.out_dir.join("report.md");
        std::fs::write(&report_path, &doc)?;
        stage.wrote("report", &report_path);
        println!("wrote {}", report_path.display());
        Ok(())
    })();
    stage.finish(result).map(|(_, manifest)| manifest)
}
