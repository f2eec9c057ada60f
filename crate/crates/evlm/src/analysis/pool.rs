//! Player embedding extraction: max pooling over valid positions, batch
//! extraction across players, and the embedding matrix file format.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{encoder_forward, EncoderWeights, ForwardMode};
use crate::pipeline::PlayerDocument;
use crate::tensor::Tensor;
use crate::tokenizer::Vocabulary;

/// One pooled vector per player.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub player_ids: Vec<String>,
    pub dim: usize,
    /// Row-major n_players x dim.
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn n_players(&self) -> usize {
        self.player_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Elementwise max over the valid (non-pad) positions of per-token hidden
/// states. Errors when nothing is valid.
pub fn max_pool_embeddings(hidden: &Tensor, validity: &[bool]) -> Result<Vec<f64>> {
    let (rows, dim) = (hidden.rows(), hidden.cols());
    if validity.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "max_pool_embeddings",
            lhs: vec![rows, dim],
            rhs: vec![validity.len()],
        });
    }
    let mut pooled = vec![f64::NEG_INFINITY; dim];
    let mut any = false;
    for (r, &ok) in validity.iter().enumerate() {
        if !ok {
            continue;
        }
        any = true;
        let row = &hidden.data()[r * dim..(r + 1) * dim];
        for (p, &v) in pooled.iter_mut().zip(row) {
            if v > *p {
                *p = v;
            }
        }
    }
    if !any {
        return Err(Error::EmptyInput("max pooling over all-pad sequence"));
    }
    Ok(pooled)
}

/// Encodes every document, runs the encoder in eval mode, and max-pools the
/// final hidden states. Parallel across players; output order follows the
/// input order.
pub fn embed_players(
    weights: &EncoderWeights,
    vocab: &Vocabulary,
    documents: &[PlayerDocument],
) -> Result<EmbeddingMatrix> {
    if documents.is_empty() {
        return Err(Error::EmptyInput("no documents to embed"));
    }
    let block = weights.config.block_size;
    let dim = weights.config.hidden_dim;
    let rows: Vec<Result<Vec<f64>>> = documents
        .par_iter()
        .map(|doc| {
            let seq = vocab.encode(&doc.text, block).trimmed();
            if seq.is_empty() {
                // an empty rendering still needs a row; zeros keep it finite
                return Ok(vec![0.0; dim]);
            }
            let fwd = encoder_forward(weights, &seq.ids, &seq.valid, ForwardMode::Eval)?;
            max_pool_embeddings(&fwd.hidden_tensor(), &seq.valid)
        })
        .collect();

    let mut data = Vec::with_capacity(documents.len() * dim);
    for row in rows {
        data.extend(row?);
    }
    Ok(EmbeddingMatrix {
        player_ids: documents.iter().map(|d| d.player_id.clone()).collect(),
        dim,
        data,
    })
}

const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

/// Binary layout: magic, u32 version, u64 n, u64 dim, n (u32 id length + id
/// bytes) records, then n*dim little-endian f64.
pub fn save_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(matrix.n_players() as u64).to_le_bytes())?;
    w.write_all(&(matrix.dim as u64).to_le_bytes())?;
    for id in &matrix.player_ids {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    for v in &matrix.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let bad = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != 1 {
        return Err(bad("unsupported version"));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let dim = u64::from_le_bytes(u64buf) as usize;
    let mut player_ids = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        player_ids.push(String::from_utf8(id).map_err(|_| bad("non-UTF8 player id"))?);
    }
    let mut data = Vec::with_capacity(n * dim);
    let mut f64buf = [0u8; 8];
    for _ in 0..n * dim {
        r.read_exact(&mut f64buf)?;
        data.push(f64::from_le_bytes(f64buf));
    }
    Ok(EmbeddingMatrix { player_ids, dim, data })
}

/// CSV alternative: player_id, then one column per dimension.
pub fn write_embeddings_csv<W: Write>(mut w: W, matrix: &EmbeddingMatrix) -> Result<()> {
    write!(w, "player_id")?;
    for c in 0..matrix.dim {
        write!(w, ",e{c}")?;
    }
    writeln!(w)?;
    for (i, id) in matrix.player_ids.iter().enumerate() {
        write!(w, "{id}")?;
        for v in matrix.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
