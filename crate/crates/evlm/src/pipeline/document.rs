//! Player documents: rendered token text with session boundaries.

use std::io::{BufRead, Write};
use std::path::Path;

use super::filter::MappedEvent;
use super::session::Session;
use crate::error::{Error, Result};

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

/// One player's rendered token text.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerDocument {
    pub player_id: String,
    /// Space-separated tokens: `[CLS]`, then each session's event tokens
    /// closed by `[SEP]`.
    pub text: String,
    /// Token index of each session's first token.
    pub session_offsets: Vec<usize>,
}

impl PlayerDocument {
    pub fn tokens(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }

    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Renders one player's chronologically ordered sessions. Each event becomes
/// `class key:value ...` in allowlist order; sessions are closed by a
/// `[SEP]` token and the document starts with `[CLS]`.
pub fn render_document(player_id: &str, sessions: &[Session<MappedEvent>]) -> PlayerDocument {
    let mut tokens: Vec<String> = vec![CLS_TOKEN.to_string()];
    let mut session_offsets = Vec::with_capacity(sessions.len());
    for session in sessions {
        session_offsets.push(tokens.len());
        for event in &session.events {
            tokens.push(event.class.clone());
            for (key, value) in &event.fields {
                tokens.push(format!("{key}:{value}"));
            }
        }
        tokens.push(SEP_TOKEN.to_string());
    }
    PlayerDocument {
        player_id: player_id.to_string(),
        text: tokens.join(" "),
        session_offsets,
    }
}

/// Writes documents as `player_id<TAB>token text` lines.
pub fn write_documents<W: Write>(mut w: W, docs: &[PlayerDocument]) -> Result<()> {
    for doc in docs {
        writeln!(w, "{}\t{}", doc.player_id, doc.text)?;
    }
    Ok(())
}

/// Reads documents written by [`write_documents`]. Session offsets are
/// reconstructed from the `[SEP]` structure.
pub fn read_documents<R: BufRead>(r: R, source: &str) -> Result<Vec<PlayerDocument>> {
    let mut docs = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (player_id, text) = line.split_once('\t').ok_or_else(|| Error::Format {
            path: source.to_string(),
            reason: format!("line {}: missing tab separator", lineno + 1),
        })?;
        let mut session_offsets = Vec::new();
        let mut expect_session_start = true;
        for (i, tok) in text.split_whitespace().enumerate() {
            if i == 0 && tok == CLS_TOKEN {
                continue;
            }
            if expect_session_start {
                session_offsets.push(i);
                expect_session_start = false;
            }
            if tok == SEP_TOKEN {
                expect_session_start = true;
            }
        }
        docs.push(PlayerDocument {
            player_id: player_id.to_string(),
            text: text.to_string(),
            session_offsets,
        });
    }
    Ok(docs)
}

pub fn load_documents(path: &Path) -> Result<Vec<PlayerDocument>> {
    let file = std::fs::File::open(path)?;
    read_documents(std::io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_event(class: &str, ts_ms: i64) -> MappedEvent {
        MappedEvent {
            player_id: "p".into(),
            ts_ms,
            class: class.into(),
            fields: vec![],
        }
    }

    fn session_of(events: Vec<MappedEvent>) -> Session<MappedEvent> {
        let start_ms = events.first().map(|e| e.ts_ms).unwrap_or(0);
        let end_ms = events.last().map(|e| e.ts_ms).unwrap_or(0);
        Session { player_id: "p".into(), events, start_ms, end_ms }
    }

    #[test]
    fn zero_sessions_renders_cls_only() {
        let doc = render_document("p", &[]);
        assert_eq!(doc.text, "[CLS]");
        assert!(doc.session_offsets.is_empty());
    }

    #[test]
    fn one_bare_event_session() {
        let doc = render_document("p", &[session_of(vec![bare_event("game_start", 0)])]);
        assert_eq!(doc.text, "[CLS] game_start [SEP]");
        assert_eq!(doc.session_offsets, vec![1]);
    }

    #[test]
    fn two_sessions_emit_two_separators() {
        let doc = render_document(
            "p",
            &[
                session_of(vec![bare_event("a", 0), bare_event("b", 1)]),
                session_of(vec![bare_event("c", 2)]),
            ],
        );
        let seps = doc.tokens().iter().filter(|t| **t == SEP_TOKEN).count();
        assert_eq!(seps, 2);
        assert_eq!(doc.session_offsets, vec![1, 4]);
    }

    #[test]
    fn fields_render_as_key_value_tokens() {
        let mut e = bare_event("round_end", 0);
        e.fields = vec![("result".into(), "win".into()), ("duration_s".into(), "short".into())];
        let doc = render_document("p", &[session_of(vec![e])]);
        assert_eq!(doc.text, "[CLS] round_end result:win duration_s:short [SEP]");
        assert_eq!(doc.token_count(), 5);
    }

    #[test]
    fn document_file_roundtrip() {
        let docs = vec![
            render_document("p1", &[session_of(vec![bare_event("a", 0)])]),
            render_document("p2", &[]),
        ];
        let mut buf = Vec::new();
        write_documents(&mut buf, &docs).unwrap();
        let back = read_documents(&buf[..], "mem").unwrap();
        assert_eq!(back, docs);
    }
}
