//! Field allowlisting and raw-value-to-term mapping.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::event::{FieldValue, RawEvent};
use crate::error::{Error, Result};

/// Per-class field allowlists plus the value-mapping rules that rewrite raw
/// identifiers and numeric ranges into descriptive terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSpec {
    /// class name -> ordered allowlist; order here is render order.
    pub classes: BTreeMap<String, Vec<FieldRule>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRule {
    pub key: String,
    pub map: ValueMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueMap {
    /// Keep the raw value, sanitized to a single whitespace-free token.
    Identity,
    /// Rewrite identifiers by longest-prefix match; unmatched values fall
    /// back to `fallback` when given, otherwise to the sanitized raw value.
    Prefix {
        rules: Vec<PrefixRule>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<String>,
    },
    /// Bucket a numeric value: `names[i]` for value <= thresholds[i], last
    /// name above all thresholds. Requires names.len() == thresholds.len()+1.
    Buckets { thresholds: Vec<f64>, names: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrefixRule {
    pub prefix: String,
    pub token: String,
}

impl FilterSpec {
    /// The bundled spec for the synthetic event schema; strips all
    /// device/app junk fields and keeps one or two informative fields per
    /// class, removing well over 90% of raw fields.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../../assets/filter_spec.default.json"))
            .expect("bundled filter spec is valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: FilterSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (class, rules) in &self.classes {
            let mut seen = std::collections::BTreeSet::new();
            for rule in rules {
                if !seen.insert(&rule.key) {
                    return Err(Error::Config(format!(
                        "filter spec: class {class} lists key {} twice",
                        rule.key
                    )));
                }
                if let ValueMap::Buckets { thresholds, names } = &rule.map {
                    if names.len() != thresholds.len() + 1 {
                        return Err(Error::Config(format!(
                            "filter spec: class {class} key {}: {} bucket names for {} thresholds",
                            rule.key,
                            names.len(),
                            thresholds.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl ValueMap {
    pub fn apply(&self, value: &FieldValue) -> String {
        match self {
            ValueMap::Identity => sanitize_token(&value_text(value)),
            ValueMap::Prefix { rules, fallback } => {
                let text = value_text(value);
                rules
                    .iter()
                    .find(|r| text.starts_with(&r.prefix))
                    .map(|r| r.token.clone())
                    .unwrap_or_else(|| {
                        fallback
                            .clone()
                            .unwrap_or_else(|| sanitize_token(&text))
                    })
            }
            ValueMap::Buckets { thresholds, names } => match value.as_number() {
                Some(v) => {
                    let idx = thresholds.iter().take_while(|&&t| v > t).count();
                    names[idx].clone()
                }
                None => sanitize_token(&value_text(value)),
            },
        }
    }
}

fn value_text(value: &FieldValue) -> String {
    match value {
        FieldValue::Text(t) => t.clone(),
        FieldValue::Number(n) => {
            if n.fract() == 0.0 && n.abs() < 1e15 {
                format!("{}", *n as i64)
            } else {
                format!("{n}")
            }
        }
    }
}

/// Tokens must never contain whitespace; collapse anything suspect to '_'.
fn sanitize_token(raw: &str) -> String {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_whitespace() || c.is_control() { '_' } else { c })
        .collect();
    if cleaned.is_empty() {
        "_".to_string()
    } else {
        cleaned
    }
}

/// An event after filtering: only allowlisted fields remain, with values
/// rewritten to descriptive terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedEvent {
    pub player_id: String,
    pub ts_ms: i64,
    pub class: String,
    /// (key, mapped value) in allowlist order.
    pub fields: Vec<(String, String)>,
}

#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub events: Vec<MappedEvent>,
    /// Events whose class is absent from the spec.
    pub dropped_unknown_class: usize,
    pub fields_in: usize,
    pub fields_out: usize,
}

impl FilterOutcome {
    /// Fraction of raw event fields removed by the allowlist.
    pub fn reduction_ratio(&self) -> f64 {
        if self.fields_in == 0 {
            0.0
        } else {
            1.0 - self.fields_out as f64 / self.fields_in as f64
        }
    }
}

/// Applies the allowlist and mapping rules. Events of classes the spec does
/// not cover are dropped and counted.
pub fn filter_and_map(events: &[RawEvent], spec: &FilterSpec) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for event in events {
        let Some(rules) = spec.classes.get(&event.class) else {
            out.dropped_unknown_class += 1;
            continue;
        };
        out.fields_in += event.fields.len();
        let mut fields = Vec::with_capacity(rules.len());
        for rule in rules {
            if let Some((_, value)) = event.fields.iter().find(|(k, _)| k == &rule.key) {
                fields.push((rule.key.clone(), rule.map.apply(value)));
            }
        }
        out.fields_out += fields.len();
        out.events.push(MappedEvent {
            player_id: event.player_id.clone(),
            ts_ms: event.ts_ms,
            class: event.class.clone(),
            fields,
        });
    }
    out
}
