//! Chronological-ordering noise: per-session event permutation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::document::{CLS_TOKEN, SEP_TOKEN};

/// With probability `p`, independently per session, permutes that session's
/// event order uniformly at random. Token multisets per session are
/// unchanged; only event-level order moves, mirroring how offline play
/// scrambles within-session ordering.
///
/// Events are recovered structurally: a new event starts at every token that
/// is neither a special token nor a `key:value` field token.
pub fn inject_order_noise(tokens: &[&str], p: f64, seed: u64) -> Vec<String> {
    assert!((0.0..=1.0).contains(&p), "noise probability {p} out of [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut session: Vec<Vec<&str>> = Vec::new(); // event groups of the open session
    for &tok in tokens {
        if tok == CLS_TOKEN {
            out.push(tok.to_string());
        } else if tok == SEP_TOKEN {
            flush_session(&mut out, &mut session, p, &mut rng);
            out.push(tok.to_string());
        } else if tok.contains(':') {
            match session.last_mut() {
                Some(event) => event.push(tok),
                // malformed head token; treat as its own group
                None => session.push(vec![tok]),
            }
        } else {
            session.push(vec![tok]);
        }
    }
    // trailing tokens without a closing separator still get the treatment
    flush_session(&mut out, &mut session, p, &mut rng);
    out
}

fn flush_session(out: &mut Vec<String>, session: &mut Vec<Vec<&str>>, p: f64, rng: &mut ChaCha8Rng) {
    if session.is_empty() {
        return;
    }
    // Draw both decisions unconditionally so the rng stream per session does
    // not depend on p; p = 0 and p = 1 then share permutation choices.
    let permute = rng.gen::<f64>() < p;
    let mut groups = std::mem::take(session);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(rng);
    if permute {
        let mut reordered: Vec<Vec<&str>> = Vec::with_capacity(groups.len());
        for &i in &order {
            reordered.push(std::mem::take(&mut groups[i]));
        }
        groups = reordered;
    }
    for group in groups {
        out.extend(group.iter().map(|t| t.to_string()));
    }
}
