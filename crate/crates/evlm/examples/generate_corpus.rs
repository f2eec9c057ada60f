//! Generate a synthetic event corpus with ground-truth archetype labels.
//!
//! ```bash
//! cargo run --release --example generate_corpus
//! ```

use std::io::BufWriter;

use evlm::synth::{default_seven, generate_corpus, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let config = GeneratorConfig::new(default_seven(), 200, 15, 42);
    let corpus = generate_corpus(&config)?;

    println!(
        "{} events, {} sessions, {} players",
        corpus.events.len(),
        corpus.total_sessions(),
        corpus.truth.len()
    );

    // per-archetype session-length means vs the analytic 1/p_len
    for mix in &config.archetypes {
        let (mut events, mut sessions) = (0usize, 0usize);
        for truth in corpus.truth.iter().filter(|t| t.archetype == mix.archetype.name) {
            for s in &truth.sessions {
                events += s.2;
                sessions += 1;
            }
        }
        if sessions > 0 {
            println!(
                "  {:<24} mean session length {:>6.2} (analytic {:>6.2}) over {} sessions",
                mix.archetype.name,
                events as f64 / sessions as f64,
                1.0 / mix.archetype.p_len,
                sessions
            );
        }
    }

    std::fs::create_dir_all("out/example_generate")?;
    let events = std::fs::File::create("out/example_generate/events.jsonl")?;
    corpus.write_events_jsonl(BufWriter::new(events))?;
    let labels = std::fs::File::create("out/example_generate/labels.tsv")?;
    corpus.write_labels_tsv(BufWriter::new(labels))?;
    println!("wrote out/example_generate/events.jsonl and labels.tsv");
    Ok(())
}
