//! Dilated sliding-window + global attention patterns and the banded
//! attention computation built on them.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::{CsrIndex, Tape, Tensor};

/// Per-position allowed-key sets for one sequence length.
///
/// Local positions see `{i} ∪ {i ± d*k : 1 <= k <= w/2}`; global positions
/// attend to and are attended by every valid position; padding positions
/// attend nowhere and are attended by nothing. Total pairs stay linear in n.
#[derive(Debug, Clone)]
pub struct AttentionPattern {
    keysets: Rc<CsrIndex>,
    n: usize,
}

impl AttentionPattern {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn allowed(&self, i: usize) -> &[u32] {
        self.keysets.row(i)
    }

    pub fn is_allowed(&self, query: usize, key: usize) -> bool {
        self.keysets.contains(query, key as u32)
    }

    pub fn pair_count(&self) -> usize {
        self.keysets.pair_count()
    }

    pub fn keysets(&self) -> Rc<CsrIndex> {
        Rc::clone(&self.keysets)
    }
}

/// Builds the attention pattern for a sequence of length `n` with total
/// window span `w`, dilation `d`, the given global positions, and per-token
/// validity. With `strict` set, a window that cannot fit (`w*d >= n`) is a
/// configuration error; otherwise it is clipped at the boundaries.
pub fn build_attention_pattern(
    n: usize,
    w: usize,
    d: usize,
    globals: &[usize],
    validity: &[bool],
    strict: bool,
) -> Result<AttentionPattern> {
    if n == 0 {
        return Err(Error::EmptyInput("attention pattern over zero positions"));
    }
    if w == 0 || w % 2 != 0 || d == 0 {
        return Err(Error::Config(format!(
            "attention pattern: window {w} must be even and positive, dilation {d} at least 1"
        )));
    }
    if validity.len() != n {
        return Err(Error::ShapeMismatch {
            op: "build_attention_pattern",
            lhs: vec![n],
            rhs: vec![validity.len()],
        });
    }
    if strict && w * d >= n {
        return Err(Error::Config(format!(
            "attention pattern: window {w} * dilation {d} covers sequence of length {n}"
        )));
    }

    let global_set: Vec<usize> = {
        let mut g: Vec<usize> = globals.iter().copied().filter(|&g| g < n && validity[g]).collect();
        g.sort_unstable();
        g.dedup();
        g
    };

    let mut offsets = Vec::with_capacity(n + 1);
    let mut keys: Vec<u32> = Vec::new();
    offsets.push(0);
    let half = w / 2;
    for i in 0..n {
        if validity[i] {
            if global_set.binary_search(&i).is_ok() {
                // global rows attend to every valid position
                keys.extend((0..n).filter(|&j| validity[j]).map(|j| j as u32));
            } else {
                let mut row: Vec<u32> = Vec::with_capacity(w + 1 + global_set.len());
                for k in 1..=half {
                    let offset = k * d;
                    if offset <= i && validity[i - offset] {
                        row.push((i - offset) as u32);
                    }
                }
                row.push(i as u32);
                for k in 1..=half {
                    let offset = k * d;
                    if i + offset < n && validity[i + offset] {
                        row.push((i + offset) as u32);
                    }
                }
                for &g in &global_set {
                    row.push(g as u32);
                }
                row.sort_unstable();
                row.dedup();
                keys.extend(row);
            }
        }
        offsets.push(keys.len());
    }
    Ok(AttentionPattern {
        keysets: Rc::new(CsrIndex { offsets, keys }),
        n,
    })
}

/// Banded multi-head attention as a pure function: per-query softmax over the
/// allowed keys only, scaled by 1/sqrt(head_dim). Queries with no allowed
/// keys produce zero rows. q, k, v are n x (heads * head_dim).
pub fn windowed_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    pattern: &AttentionPattern,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let q_id = tape.leaf(q.data().to_vec(), q.shape().to_vec(), false);
    let k_id = tape.leaf(k.data().to_vec(), k.shape().to_vec(), false);
    let v_id = tape.leaf(v.data().to_vec(), v.shape().to_vec(), false);
    let head_dim = q.cols() / heads.max(1);
    let scale = 1.0 / (head_dim as f64).sqrt();
    let out = tape.windowed_attention(q_id, k_id, v_id, heads, pattern.keysets(), scale)?;
    Ok(tape.to_tensor(out))
}
