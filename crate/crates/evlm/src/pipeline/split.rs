//! Player-level train/validation split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::document::PlayerDocument;
use crate::error::{Error, Result};

/// Splits documents by player id into disjoint, exhaustive train/validation
/// sets: `floor(n_players * train_fraction)` players (at least one) go to
/// train, the rest to validation. Deterministic given the seed and
/// independent of input order.
pub fn split_train_val(
    documents: Vec<PlayerDocument>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<PlayerDocument>, Vec<PlayerDocument>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must be strictly between 0 and 1"
        )));
    }
    let mut players: Vec<String> = documents.iter().map(|d| d.player_id.clone()).collect();
    players.sort();
    players.dedup();
    if players.len() < 2 {
        return Err(Error::EmptySplit("validation"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    players.shuffle(&mut rng);
    let n_train = ((players.len() as f64 * train_fraction).floor() as usize)
        .clamp(1, players.len() - 1);
    let train_set: std::collections::BTreeSet<&str> =
        players[..n_train].iter().map(|s| s.as_str()).collect();

    let mut train = Vec::new();
    let mut val = Vec::new();
    for doc in documents {
        if train_set.contains(doc.player_id.as_str()) {
            train.push(doc);
        } else {
            val.push(doc);
        }
    }
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    Ok((train, val))
}
