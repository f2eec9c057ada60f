//! Vocabulary construction and encoding.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::TokenSequence;
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Word-level token <-> id tables. Specials always occupy ids 0..4; regular
/// tokens follow densely, ordered by (count desc, token asc) so construction
/// is deterministic and the serialized table is byte-stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from whitespace-tokenized documents. Tokens with
    /// count below `min_count` are left out (and will encode as `[UNK]`).
    pub fn build<'a, I>(documents: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            for token in doc.split_whitespace() {
                if SPECIAL_TOKENS.contains(&token) {
                    continue;
                }
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let mut ordered: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(ordered.into_iter().map(|(t, _)| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { token_to_id, id_to_token }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < SPECIAL_TOKENS.len() as u32
    }

    /// Whitespace-splits, looks ids up (unknown words become `[UNK]`),
    /// truncates to `block_size`, and right-pads with `[PAD]`.
    pub fn encode(&self, text: &str, block_size: usize) -> TokenSequence {
        assert!(block_size >= 1, "block_size must be at least 1");
        let mut ids: Vec<u32> = text
            .split_whitespace()
            .take(block_size)
            .map(|t| self.id(t).unwrap_or(UNK_ID))
            .collect();
        let valid_len = ids.len();
        ids.resize(block_size, PAD_ID);
        let valid = (0..block_size).map(|i| i < valid_len).collect();
        TokenSequence { ids, valid, labels: None }
    }

    /// Joins tokens back to text, skipping padding.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != PAD_ID)
            .map(|&id| self.token(id).unwrap_or(SPECIAL_TOKENS[UNK_ID as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One `token<TAB>id` line per entry, specials first; byte-stable.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, token) in self.id_to_token.iter().enumerate() {
            writeln!(w, "{token}\t{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let mut id_to_token = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| Error::Format {
                path: source.to_string(),
                reason: format!("line {}: {reason}", lineno + 1),
            };
            let (token, id_str) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab".into()))?;
            let id: usize = id_str
                .parse()
                .map_err(|_| bad(format!("bad id {id_str}")))?;
            if id != id_to_token.len() {
                return Err(bad(format!("non-dense id {id}")));
            }
            id_to_token.push(token.to_string());
        }
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if id_to_token.get(i).map(String::as_str) != Some(*special) {
                return Err(Error::Format {
                    path: source.to_string(),
                    reason: format!("special token {special} missing at id {i}"),
                });
            }
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self { token_to_id, id_to_token })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(r, &path.display().to_string())
    }
}
