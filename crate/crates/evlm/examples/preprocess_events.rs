//! Raw events through the full preprocessing pipeline: parse, filter and
//! map values, sessionize, render documents, and split by player.
//!
//! ```bash
//! cargo run --release --example preprocess_events
//! ```

use std::collections::BTreeMap;

use evlm::pipeline::{
    filter_and_map, parse_events, render_document, sessionize, split_train_val, FilterSpec,
};
use evlm::synth::{generate_corpus, separated_four, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    // in-memory corpus; the CLI does the same from files
    let corpus = generate_corpus(&GeneratorConfig::new(separated_four(), 60, 8, 3))?;
    let mut jsonl = Vec::new();
    corpus.write_events_jsonl(&mut jsonl)?;

    let parsed = parse_events(&jsonl[..])?;
    println!("parsed {} events ({} malformed)", parsed.events.len(), parsed.malformed);

    let spec = FilterSpec::bundled();
    let filtered = filter_and_map(&parsed.events, &spec);
    println!(
        "field reduction {:.1}% ({} -> {} fields)",
        filtered.reduction_ratio() * 100.0,
        filtered.fields_in,
        filtered.fields_out
    );

    let mut by_player: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for event in filtered.events {
        by_player.entry(event.player_id.clone()).or_default().push(event);
    }
    let mut documents = Vec::new();
    for (player_id, events) in by_player {
        let sessions = sessionize(&player_id, events, 15);
        documents.push(render_document(&player_id, &sessions));
    }
    let sample = &documents[0];
    let preview: Vec<&str> = sample.tokens().into_iter().take(18).collect();
    println!("{}: {} tokens, starts: {} ...", sample.player_id, sample.token_count(), preview.join(" "));

    let (train, val) = split_train_val(documents, 0.67, 3)?;
    println!("split: {} train / {} val documents", train.len(), val.len());
    Ok(())
}
