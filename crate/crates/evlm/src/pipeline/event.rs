//! Raw behavior events and JSONL parsing.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tracked in-game event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub player_id: String,
    pub ts_ms: i64,
    pub class: String,
    /// Field map in document order.
    pub fields: Vec<(String, FieldValue)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    Number(f64),
}

impl FieldValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            FieldValue::Number(n) => Some(*n),
            FieldValue::Text(t) => t.parse().ok(),
        }
    }
}

impl RawEvent {
    /// Serializes to the one-line JSON wire format consumed by `parse_events`.
    pub fn to_json_line(&self) -> String {
        let mut fields = serde_json::Map::new();
        for (k, v) in &self.fields {
            let value = match v {
                FieldValue::Text(t) => serde_json::Value::String(t.clone()),
                FieldValue::Number(n) => serde_json::json!(n),
            };
            fields.insert(k.clone(), value);
        }
        serde_json::json!({
            "player_id": self.player_id,
            "ts_ms": self.ts_ms,
            "class": self.class,
            "fields": fields,
        })
        .to_string()
    }
}

#[derive(Deserialize)]
struct WireEvent {
    player_id: String,
    ts_ms: i64,
    class: String,
    fields: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub events: Vec<RawEvent>,
    /// Non-empty lines that failed to parse and were skipped.
    pub malformed: usize,
    pub total_lines: usize,
}

/// Parses one JSONL event per line, in input order. Malformed lines are
/// counted and skipped; parsing fails outright only when more than half the
/// non-empty lines are malformed.
pub fn parse_events<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    parse_events_with_limit(reader, 50)
}

/// As [`parse_events`] with a configurable malformed-line percentage limit.
pub fn parse_events_with_limit<R: BufRead>(reader: R, limit_percent: u8) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.total_lines += 1;
        match parse_line(&line) {
            Some(event) => out.events.push(event),
            None => out.malformed += 1,
        }
    }
    if out.total_lines > 0 && out.malformed * 100 > out.total_lines * limit_percent as usize {
        return Err(Error::TooManyMalformed {
            malformed: out.malformed,
            total: out.total_lines,
            limit_percent,
        });
    }
    Ok(out)
}

fn parse_line(line: &str) -> Option<RawEvent> {
    let wire: WireEvent = serde_json::from_str(line).ok()?;
    let mut fields = Vec::with_capacity(wire.fields.len());
    for (key, value) in wire.fields {
        let field = match value {
            serde_json::Value::String(s) => FieldValue::Text(s),
            serde_json::Value::Number(n) => FieldValue::Number(n.as_f64()?),
            // only string|number payloads are part of the schema
            _ => return None,
        };
        fields.push((key, field));
    }
    Some(RawEvent {
        player_id: wire.player_id,
        ts_ms: wire.ts_ms,
        class: wire.class,
        fields,
    })
}
