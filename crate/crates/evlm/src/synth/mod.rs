//! Synthetic player event-log generator with ground-truth archetypes.
//!
//! Generates raw JSONL events in exactly the schema the pipeline consumes.
//! Session lengths and daily activity follow geometric laws; inter-session
//! gaps exceed the sessionization threshold by construction, so recovered
//! sessions match the generator's ground truth exactly. Every event carries a
//! pile of device/app junk fields so the bundled filter spec has something
//! realistic to strip.

mod archetypes;
mod fields;

pub use archetypes::{default_seven, separated_four};

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::RawEvent;

/// The twelve semantic event classes of the synthetic schema.
pub const EVENT_CLASSES: [&str; 12] = [
    "app_start",
    "app_end",
    "round_start",
    "round_end",
    "level_up",
    "purchase",
    "reward_claim",
    "social_activity",
    "quest_start",
    "quest_complete",
    "popup",
    "notification",
];

/// Interior event categories an archetype can weight. `round_start` and
/// `quest_start` emit their paired end event right after when room remains.
pub const INTERIOR_CLASSES: [&str; 8] = [
    "round_start",
    "quest_start",
    "level_up",
    "purchase",
    "reward_claim",
    "social_activity",
    "popup",
    "notification",
];

/// A ground-truth behavioral profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// Relative rate of each interior event class.
    pub class_weights: BTreeMap<String, f64>,
    /// Geometric parameter for events per session (mean 1/p_len).
    pub p_len: f64,
    /// Geometric parameter for sessions per day (mean (1-p)/p).
    pub p_act: f64,
    /// Scales purchase class rate and shifts purchase values upmarket.
    pub purchase_propensity: f64,
    /// Scales social class rate and related value choices.
    pub social_propensity: f64,
}

impl Archetype {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_len > 0.0 && self.p_len <= 1.0) || !(self.p_act > 0.0 && self.p_act <= 1.0) {
            return Err(Error::Config(format!(
                "archetype {}: p_len and p_act must lie in (0, 1]",
                self.name
            )));
        }
        let mut any_positive = false;
        for (class, w) in &self.class_weights {
            if !INTERIOR_CLASSES.contains(&class.as_str()) {
                return Err(Error::Config(format!(
                    "archetype {}: unknown interior class {class}",
                    self.name
                )));
            }
            if *w < 0.0 {
                return Err(Error::Config(format!(
                    "archetype {}: negative weight for {class}",
                    self.name
                )));
            }
            any_positive |= *w > 0.0;
        }
        if !any_positive {
            return Err(Error::Config(format!(
                "archetype {}: needs at least one positive class weight",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchetypeMix {
    pub archetype: Archetype,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub archetypes: Vec<ArchetypeMix>,
    pub players: usize,
    pub days: u32,
    pub seed: u64,
    /// Mean gap between events inside a session, seconds.
    pub mean_event_interval_s: f64,
}

impl GeneratorConfig {
    pub fn new(archetypes: Vec<ArchetypeMix>, players: usize, days: u32, seed: u64) -> Self {
        Self {
            archetypes,
            players,
            days,
            seed,
            mean_event_interval_s: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.archetypes.is_empty() {
            return Err(Error::Config("generator: no archetypes".into()));
        }
        let total: f64 = self.archetypes.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "generator: mixture weights sum to {total}, expected 1"
            )));
        }
        for mix in &self.archetypes {
            if mix.weight < 0.0 {
                return Err(Error::Config("generator: negative mixture weight".into()));
            }
            mix.archetype.validate()?;
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: GeneratorConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Ground-truth description of one generated player.
#[derive(Debug, Clone)]
pub struct PlayerTruth {
    pub player_id: String,
    pub archetype: String,
    /// (start_ms, end_ms, event count) per session, chronological.
    pub sessions: Vec<(i64, i64, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct GeneratedCorpus {
    /// Grouped by player in id order, chronological within a player.
    pub events: Vec<RawEvent>,
    pub truth: Vec<PlayerTruth>,
}

impl GeneratedCorpus {
    pub fn labels(&self) -> Vec<(String, String)> {
        self.truth
            .iter()
            .map(|t| (t.player_id.clone(), t.archetype.clone()))
            .collect()
    }

    pub fn total_sessions(&self) -> usize {
        self.truth.iter().map(|t| t.sessions.len()).sum()
    }

    pub fn write_events_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for event in &self.events {
            writeln!(w, "{}", event.to_json_line())?;
        }
        Ok(())
    }

    pub fn write_labels_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for truth in &self.truth {
            writeln!(w, "{}\t{}", truth.player_id, truth.archetype)?;
        }
        Ok(())
    }
}

/// One geometric draw with support {1, 2, ...}; mean 1/p.
pub fn sample_session_length<R: Rng>(p_len: f64, rng: &mut R) -> usize {
    assert!(p_len > 0.0 && p_len <= 1.0, "p_len {p_len} out of (0, 1]");
    if p_len >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen();
    1 + ((1.0 - u).ln() / (1.0 - p_len).ln()).floor() as usize
}

/// Geometric with support {0, 1, ...}; mean (1-p)/p. Drives daily activity.
fn sample_count0<R: Rng>(p: f64, rng: &mut R) -> usize {
    sample_session_length(p, rng) - 1
}

const DAY_MS: i64 = 86_400_000;
const EPOCH_MS: i64 = 1_600_000_000_000;
/// Minimum inter-session gap; one minute past the 15-minute rule.
const SESSION_GAP_MIN_MS: i64 = 16 * 60_000;
/// Intra-session gaps are clamped below the 15-minute rule.
const INTRA_GAP_MAX_MS: i64 = 14 * 60_000;

/// Generates the full corpus. Deterministic given the config seed; players
/// are generated on independent rng streams so parallelism cannot change the
/// output.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<GeneratedCorpus> {
    config.validate()?;
    let per_player: Vec<(Vec<RawEvent>, PlayerTruth)> = (0..config.players)
        .into_par_iter()
        .map(|idx| generate_player(config, idx))
        .collect();

    let mut corpus = GeneratedCorpus::default();
    for (events, truth) in per_player {
        corpus.events.extend(events);
        corpus.truth.push(truth);
    }
    Ok(corpus)
}

fn player_rng(seed: u64, player_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ (player_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

fn pick_archetype<'a>(config: &'a GeneratorConfig, rng: &mut ChaCha8Rng) -> &'a Archetype {
    let mut u: f64 = rng.gen();
    for mix in &config.archetypes {
        u -= mix.weight;
        if u <= 0.0 {
            return &mix.archetype;
        }
    }
    &config.archetypes.last().expect("validated non-empty").archetype
}

fn generate_player(config: &GeneratorConfig, idx: usize) -> (Vec<RawEvent>, PlayerTruth) {
    let mut rng = player_rng(config.seed, idx);
    let archetype = pick_archetype(config, &mut rng).clone();
    let player_id = format!("p{idx:05}");
    let profile = fields::DeviceProfile::draw(&mut rng);

    // sessions per day, then one forced session for otherwise idle players
    let mut session_days: Vec<u32> = Vec::new();
    for day in 0..config.days {
        for _ in 0..sample_count0(archetype.p_act, &mut rng) {
            session_days.push(day);
        }
    }
    if session_days.is_empty() {
        session_days.push(rng.gen_range(0..config.days.max(1)));
    }

    let mut events = Vec::new();
    let mut sessions = Vec::new();
    let mut cursor = EPOCH_MS + rng.gen_range(0..DAY_MS / 4);
    for &day in &session_days {
        let day_floor = EPOCH_MS + day as i64 * DAY_MS;
        let jitter = rng.gen_range(0..DAY_MS / 3);
        cursor = (day_floor + jitter).max(cursor + SESSION_GAP_MIN_MS + rng.gen_range(0..DAY_MS / 8));
        let (session_events, end_ms) =
            generate_session(&archetype, &profile, &player_id, cursor, config, &mut rng);
        sessions.push((cursor, end_ms, session_events.len()));
        events.extend(session_events);
        cursor = end_ms;
    }

    let truth = PlayerTruth {
        player_id,
        archetype: archetype.name.clone(),
        sessions,
    };
    (events, truth)
}

fn generate_session(
    archetype: &Archetype,
    profile: &fields::DeviceProfile,
    player_id: &str,
    start_ms: i64,
    config: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<RawEvent>, i64) {
    let length = sample_session_length(archetype.p_len, rng);
    let mut classes = Vec::with_capacity(length);
    classes.push("app_start".to_string());
    if length >= 2 {
        let mut interior = length - 2;
        while interior > 0 {
            let class = draw_interior_class(archetype, rng);
            let paired = matches!(class, "round_start" | "quest_start");
            classes.push(class.to_string());
            interior -= 1;
            if paired && interior > 0 {
                let end = if class == "round_start" { "round_end" } else { "quest_complete" };
                classes.push(end.to_string());
                interior -= 1;
            }
        }
        classes.push("app_end".to_string());
    }

    let mut events = Vec::with_capacity(classes.len());
    let mut ts = start_ms;
    let session_uuid = fields::session_uuid(rng);
    for (i, class) in classes.iter().enumerate() {
        if i > 0 {
            ts += intra_gap_ms(config.mean_event_interval_s, rng);
        }
        let mut event = RawEvent {
            player_id: player_id.to_string(),
            ts_ms: ts,
            class: class.clone(),
            fields: Vec::new(),
        };
        fields::fill_junk_fields(&mut event, profile, &session_uuid, rng);
        fields::fill_informative_fields(&mut event, archetype, start_ms, rng);
        events.push(event);
    }
    (events, ts)
}

fn draw_interior_class<'a>(archetype: &Archetype, rng: &mut ChaCha8Rng) -> &'a str {
    let mut weights = Vec::with_capacity(INTERIOR_CLASSES.len());
    let mut total = 0.0;
    for &class in &INTERIOR_CLASSES {
        let mut w = archetype.class_weights.get(class).copied().unwrap_or(0.0);
        if class == "purchase" {
            w *= archetype.purchase_propensity;
        }
        if class == "social_activity" {
            w *= archetype.social_propensity;
        }
        total += w;
        weights.push(w);
    }
    if total <= 0.0 {
        return "popup";
    }
    let mut u: f64 = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return INTERIOR_CLASSES[i];
        }
    }
    INTERIOR_CLASSES[INTERIOR_CLASSES.len() - 1]
}

fn intra_gap_ms(mean_s: f64, rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.gen::<f64>().max(1e-12);
    let exp_ms = (-u.ln() * mean_s * 1000.0) as i64;
    exp_ms.clamp(200, INTRA_GAP_MAX_MS)
}
