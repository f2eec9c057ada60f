//! Inactivity-gap sessionization.

use super::event::RawEvent;
use super::filter::MappedEvent;

/// Default inactivity threshold between sessions.
pub const DEFAULT_GAP_MINUTES: u64 = 15;

pub trait HasTimestamp {
    fn ts_ms(&self) -> i64;
}

impl HasTimestamp for RawEvent {
    fn ts_ms(&self) -> i64 {
        self.ts_ms
    }
}

impl HasTimestamp for MappedEvent {
    fn ts_ms(&self) -> i64 {
        self.ts_ms
    }
}

impl HasTimestamp for i64 {
    fn ts_ms(&self) -> i64 {
        *self
    }
}

/// A gap-delimited group of one player's events.
#[derive(Debug, Clone)]
pub struct Session<E> {
    pub player_id: String,
    pub events: Vec<E>,
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Sorts one player's events by timestamp (stable, so equal timestamps keep
/// ingestion order) and splits wherever the inter-event gap exceeds
/// `gap_minutes`. The union of the returned sessions is exactly the input.
pub fn sessionize<E: HasTimestamp>(
    player_id: &str,
    events: Vec<E>,
    gap_minutes: u64,
) -> Vec<Session<E>> {
    if events.is_empty() {
        return Vec::new();
    }
    let gap_ms = gap_minutes as i64 * 60_000;
    let mut events = events;
    events.sort_by_key(|e| e.ts_ms());

    let mut sessions = Vec::new();
    let mut current: Vec<E> = Vec::new();
    for event in events {
        if let Some(last) = current.last() {
            if event.ts_ms() - last.ts_ms() > gap_ms {
                sessions.push(close_session(player_id, std::mem::take(&mut current)));
            }
        }
        current.push(event);
    }
    sessions.push(close_session(player_id, current));
    sessions
}

fn close_session<E: HasTimestamp>(player_id: &str, events: Vec<E>) -> Session<E> {
    let start_ms = events.first().map(|e| e.ts_ms()).unwrap_or(0);
    let end_ms = events.last().map(|e| e.ts_ms()).unwrap_or(0);
    Session {
        player_id: player_id.to_string(),
        events,
        start_ms,
        end_ms,
    }
}
