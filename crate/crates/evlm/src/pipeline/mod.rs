//! Event preprocessing: raw JSONL logs through filtering, value mapping,
//! sessionization, and document rendering, plus the ordering-noise injector
//! and the player-level train/validation split.

mod document;
mod event;
mod filter;
mod noise;
mod session;
mod split;

pub use document::{
    load_documents, read_documents, render_document, write_documents, PlayerDocument, CLS_TOKEN,
    SEP_TOKEN,
};
pub use event::{parse_events, parse_events_with_limit, FieldValue, ParseOutcome, RawEvent};
pub use filter::{filter_and_map, FieldRule, FilterOutcome, FilterSpec, MappedEvent, ValueMap};
pub use noise::inject_order_noise;
pub use session::{sessionize, HasTimestamp, Session, DEFAULT_GAP_MINUTES};
pub use split::split_train_val;
