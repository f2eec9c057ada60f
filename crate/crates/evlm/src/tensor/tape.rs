//! Wengert tape: records operations during the forward pass and replays them
//! in reverse to compute gradients.
//!
//! Values live in an arena indexed by [`ValueId`]; each recorded op knows its
//! input/output ids plus whatever it cached for the backward rule. A slot only
//! receives a gradient if it transitively depends on a `requires_grad` leaf,
//! so backward touches exactly the tensors that asked for it.

use std::rc::Rc;

use super::kernels;
use super::{CsrIndex, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

struct Slot {
    data: Vec<f64>,
    shape: Vec<usize>,
    needs_grad: bool,
}

enum Op {
    Matmul { a: ValueId, b: ValueId, out: ValueId, m: usize, k: usize, n: usize },
    /// out = a (m x k) * b(n x k)^T — used for the tied-embedding MLM head.
    MatmulBt { a: ValueId, b: ValueId, out: ValueId, m: usize, k: usize, n: usize },
    Add { a: ValueId, b: ValueId, out: ValueId },
    /// out[r, c] = a[r, c] + bias[c].
    AddRowBroadcast { a: ValueId, bias: ValueId, out: ValueId, rows: usize, cols: usize },
    Mul { a: ValueId, b: ValueId, out: ValueId },
    Scale { a: ValueId, c: f64, out: ValueId },
    Gelu { a: ValueId, out: ValueId },
    LayerNorm {
        x: ValueId,
        gain: ValueId,
        bias: ValueId,
        out: ValueId,
        rows: usize,
        cols: usize,
        mean: Vec<f64>,
        rstd: Vec<f64>,
    },
    SoftmaxRows { x: ValueId, out: ValueId, rows: usize, cols: usize },
    /// Banded multi-head attention; `probs` caches the attention weights per
    /// head in pattern order (heads x pair_count), ragged rows.
    Attention {
        q: ValueId,
        k: ValueId,
        v: ValueId,
        out: ValueId,
        heads: usize,
        n: usize,
        dim: usize,
        keysets: Rc<CsrIndex>,
        scale: f64,
        probs: Vec<f64>,
    },
    /// out[t] = table[ids[t]] (row gather).
    Gather { table: ValueId, out: ValueId, ids: Rc<Vec<u32>>, dim: usize },
    /// Mean negative log-likelihood over `masked` rows of `logits`.
    CrossEntropyMasked {
        logits: ValueId,
        out: ValueId,
        targets: Rc<Vec<u32>>,
        masked: Rc<Vec<usize>>,
        vocab: usize,
    },
    /// Inverted-dropout; mask entries are 0.0 or 1/keep.
    Dropout { x: ValueId, out: ValueId, mask: Vec<f64> },
    /// Scalar out = sum_i x[i] * c[i].
    DotConst { x: ValueId, out: ValueId, c: Rc<Vec<f64>> },
    SumAll { x: ValueId, out: ValueId },
}

/// Reverse-mode AD tape.
#[derive(Default)]
pub struct Tape {
    slots: Vec<Slot>,
    ops: Vec<Op>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Copy a tensor onto the tape as a leaf.
    pub fn input(&mut self, t: &Tensor) -> ValueId {
        self.leaf(t.data().to_vec(), t.shape().to_vec(), t.requires_grad)
    }

    pub fn leaf(&mut self, data: Vec<f64>, shape: Vec<usize>, needs_grad: bool) -> ValueId {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        let id = ValueId(self.slots.len());
        self.slots.push(Slot { data, shape, needs_grad });
        self.grads.push(None);
        id
    }

    fn alloc(&mut self, data: Vec<f64>, shape: Vec<usize>, needs_grad: bool) -> ValueId {
        self.leaf(data, shape, needs_grad)
    }

    pub fn data(&self, id: ValueId) -> &[f64] {
        &self.slots[id.0].data
    }

    pub fn shape(&self, id: ValueId) -> &[usize] {
        &self.slots[id.0].shape
    }

    pub fn numel(&self, id: ValueId) -> usize {
        self.slots[id.0].data.len()
    }

    /// Scalar value of a 1-element slot.
    pub fn scalar(&self, id: ValueId) -> f64 {
        debug_assert_eq!(self.numel(id), 1);
        self.slots[id.0].data[0]
    }

    pub fn grad(&self, id: ValueId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    pub fn to_tensor(&self, id: ValueId) -> Tensor {
        Tensor::from_vec(self.shape(id).to_vec(), self.data(id).to_vec())
            .expect("slot shape is consistent by construction")
    }

    fn needs(&self, id: ValueId) -> bool {
        self.slots[id.0].needs_grad
    }

    fn rows_cols(&self, id: ValueId) -> (usize, usize) {
        let shape = &self.slots[id.0].shape;
        let cols = *shape.last().unwrap_or(&1);
        let rows = self.slots[id.0].data.len() / cols.max(1);
        (rows, cols)
    }

    // ── Recorded operations ──────────────────────────────────────────

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        kernels::matmul_acc(self.data(a), self.data(b), &mut data, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        let out = self.alloc(data, vec![m, n], needs);
        self.ops.push(Op::Matmul { a, b, out, m, k, n });
        Ok(out)
    }

    /// out = a * b^T where a is m x k and b is n x k.
    pub fn matmul_bt(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::ShapeMismatch { op: "matmul_bt", lhs: sa, rhs: sb });
        }
        let (m, k, n) = (sa[0], sa[1], sb[0]);
        let mut data = vec![0.0; m * n];
        kernels::matmul_bt_acc(self.data(a), self.data(b), &mut data, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        let out = self.alloc(data, vec![m, n], needs);
        self.ops.push(Op::MatmulBt { a, b, out, m, k, n });
        Ok(out)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let needs = self.needs(a) || self.needs(b);
        let shape = self.shape(a).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::Add { a, b, out });
        Ok(out)
    }

    /// Adds a length-`cols` bias to every row of `a`.
    pub fn add_row_broadcast(&mut self, a: ValueId, bias: ValueId) -> Result<ValueId> {
        let (rows, cols) = self.rows_cols(a);
        if self.numel(bias) != cols {
            return Err(Error::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let mut data = self.data(a).to_vec();
        let bias_data = self.data(bias).to_vec();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += bias_data[c];
            }
        }
        let needs = self.needs(a) || self.needs(bias);
        let shape = self.shape(a).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::AddRowBroadcast { a, bias, out, rows, cols });
        Ok(out)
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let data: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let needs = self.needs(a) || self.needs(b);
        let shape = self.shape(a).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::Mul { a, b, out });
        Ok(out)
    }

    pub fn scale(&mut self, a: ValueId, c: f64) -> ValueId {
        let data: Vec<f64> = self.data(a).iter().map(|x| x * c).collect();
        let needs = self.needs(a);
        let shape = self.shape(a).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::Scale { a, c, out });
        out
    }

    pub fn gelu(&mut self, a: ValueId) -> ValueId {
        let data: Vec<f64> = self.data(a).iter().map(|&x| kernels::gelu(x)).collect();
        let needs = self.needs(a);
        let shape = self.shape(a).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::Gelu { a, out });
        out
    }

    /// Per-row zero mean / unit variance over the trailing axis, then affine.
    pub fn layer_norm(&mut self, x: ValueId, gain: ValueId, bias: ValueId, eps: f64) -> Result<ValueId> {
        let (rows, cols) = self.rows_cols(x);
        if self.numel(gain) != cols || self.numel(bias) != cols {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(gain).to_vec(),
            });
        }
        let mut data = vec![0.0; rows * cols];
        let (mean, rstd) = kernels::layer_norm_forward(
            self.data(x),
            self.data(gain),
            self.data(bias),
            eps,
            rows,
            cols,
            &mut data,
        );
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        let shape = self.shape(x).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::LayerNorm { x, gain, bias, out, rows, cols, mean, rstd });
        Ok(out)
    }

    pub fn softmax_rows(&mut self, x: ValueId) -> ValueId {
        let (rows, cols) = self.rows_cols(x);
        let mut data = self.data(x).to_vec();
        kernels::softmax_rows_inplace(&mut data, rows, cols);
        let needs = self.needs(x);
        let shape = self.shape(x).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::SoftmaxRows { x, out, rows, cols });
        out
    }

    /// Banded multi-head attention over q, k, v of shape n x (heads*dim).
    ///
    /// For each head and each query row, softmax runs over the allowed keys
    /// from `keysets` only; rows with no allowed keys produce a zero output
    /// row. Work and cache memory are proportional to the allowed-pair count.
    pub fn windowed_attention(
        &mut self,
        q: ValueId,
        k: ValueId,
        v: ValueId,
        heads: usize,
        keysets: Rc<CsrIndex>,
        scale: f64,
    ) -> Result<ValueId> {
        let sq = self.shape(q).to_vec();
        if self.shape(k) != sq.as_slice() || self.shape(v) != sq.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "windowed_attention",
                lhs: sq,
                rhs: self.shape(k).to_vec(),
            });
        }
        let n = sq[0];
        let model_dim = sq[1];
        if n != keysets.n_rows() || model_dim % heads != 0 {
            return Err(Error::Config(format!(
                "attention: n={} pattern_rows={} model_dim={} heads={}",
                n,
                keysets.n_rows(),
                model_dim,
                heads
            )));
        }
        let dim = model_dim / heads;
        let pairs = keysets.pair_count();
        let mut out_data = vec![0.0; n * model_dim];
        let mut probs = vec![0.0; heads * pairs];

        let qd = self.data(q);
        let kd = self.data(k);
        let vd = self.data(v);
        for h in 0..heads {
            let col0 = h * dim;
            for i in 0..n {
                let allowed = keysets.row(i);
                if allowed.is_empty() {
                    continue;
                }
                let base = h * pairs + keysets.offsets[i];
                let q_row = &qd[i * model_dim + col0..i * model_dim + col0 + dim];
                // scores over the allowed set
                for (a, &j) in allowed.iter().enumerate() {
                    let k_row = &kd[j as usize * model_dim + col0..j as usize * model_dim + col0 + dim];
                    probs[base + a] = scale * kernels::dot(q_row, k_row);
                }
                kernels::softmax_inplace(&mut probs[base..base + allowed.len()]);
                let out_row = &mut out_data[i * model_dim + col0..i * model_dim + col0 + dim];
                for (a, &j) in allowed.iter().enumerate() {
                    let w = probs[base + a];
                    let v_row = &vd[j as usize * model_dim + col0..j as usize * model_dim + col0 + dim];
                    for d in 0..dim {
                        out_row[d] += w * v_row[d];
                    }
                }
            }
        }

        let needs = self.needs(q) || self.needs(k) || self.needs(v);
        let out = self.alloc(out_data, vec![n, model_dim], needs);
        self.ops.push(Op::Attention { q, k, v, out, heads, n, dim, keysets, scale, probs });
        Ok(out)
    }

    /// Row gather: out[t] = table[ids[t]].
    pub fn gather(&mut self, table: ValueId, ids: Rc<Vec<u32>>) -> Result<ValueId> {
        let st = self.shape(table).to_vec();
        if st.len() != 2 {
            return Err(Error::ShapeMismatch { op: "gather", lhs: st, rhs: vec![] });
        }
        let (vocab, dim) = (st[0], st[1]);
        let t = self.data(table);
        let mut data = vec![0.0; ids.len() * dim];
        for (pos, &id) in ids.iter().enumerate() {
            let id = id as usize;
            debug_assert!(id < vocab, "gather id {id} out of range {vocab}");
            data[pos * dim..(pos + 1) * dim].copy_from_slice(&t[id * dim..(id + 1) * dim]);
        }
        let needs = self.needs(table);
        let rows = ids.len();
        let out = self.alloc(data, vec![rows, dim], needs);
        self.ops.push(Op::Gather { table, out, ids, dim });
        Ok(out)
    }

    /// Mean negative log-likelihood of `targets` over the rows selected by
    /// `mask`. Errors if the mask selects nothing.
    pub fn cross_entropy_masked(
        &mut self,
        logits: ValueId,
        targets: &[u32],
        mask: &[bool],
    ) -> Result<ValueId> {
        let (rows, vocab) = self.rows_cols(logits);
        if targets.len() != rows || mask.len() != rows {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy_masked",
                lhs: vec![rows, vocab],
                rhs: vec![targets.len(), mask.len()],
            });
        }
        let masked: Vec<usize> = (0..rows).filter(|&t| mask[t]).collect();
        if masked.is_empty() {
            return Err(Error::EmptyMask);
        }
        let data = self.data(logits);
        let mut total = 0.0;
        for &t in &masked {
            let row = &data[t * vocab..(t + 1) * vocab];
            let lse = kernels::log_sum_exp(row);
            total += lse - row[targets[t] as usize];
        }
        let loss = total / masked.len() as f64;
        let needs = self.needs(logits);
        let out = self.alloc(vec![loss], vec![1], needs);
        self.ops.push(Op::CrossEntropyMasked {
            logits,
            out,
            targets: Rc::new(targets.to_vec()),
            masked: Rc::new(masked),
            vocab,
        });
        Ok(out)
    }

    /// Inverted dropout: keeps each entry with probability `keep`, scaling
    /// survivors by 1/keep. `keep == 1.0` records an identity mask.
    pub fn dropout<R: rand::Rng>(&mut self, x: ValueId, keep: f64, rng: &mut R) -> ValueId {
        let mask: Vec<f64> = (0..self.numel(x))
            .map(|_| {
                if keep >= 1.0 || rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let data: Vec<f64> = self.data(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let needs = self.needs(x);
        let shape = self.shape(x).to_vec();
        let out = self.alloc(data, shape, needs);
        self.ops.push(Op::Dropout { x, out, mask });
        out
    }

    /// Scalar projection against a fixed coefficient vector.
    pub fn dot_const(&mut self, x: ValueId, c: Rc<Vec<f64>>) -> Result<ValueId> {
        if c.len() != self.numel(x) {
            return Err(Error::ShapeMismatch {
                op: "dot_const",
                lhs: self.shape(x).to_vec(),
                rhs: vec![c.len()],
            });
        }
        let value = kernels::dot(self.data(x), &c);
        let needs = self.needs(x);
        let out = self.alloc(vec![value], vec![1], needs);
        self.ops.push(Op::DotConst { x, out, c });
        Ok(out)
    }

    pub fn sum_all(&mut self, x: ValueId) -> ValueId {
        let value = self.data(x).iter().sum();
        let needs = self.needs(x);
        let out = self.alloc(vec![value], vec![1], needs);
        self.ops.push(Op::SumAll { x, out });
        out
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Backward from a scalar loss with seed 1.
    pub fn backward(&mut self, loss: ValueId) {
        self.backward_seeded(loss, 1.0);
    }

    /// Backward from a scalar loss with an arbitrary seed value (used to fold
    /// per-item losses into a weighted batch objective).
    pub fn backward_seeded(&mut self, loss: ValueId, seed: f64) {
        assert_eq!(self.numel(loss), 1, "backward expects a scalar loss");
        self.grads[loss.0] = Some(vec![seed]);
        let ops = std::mem::take(&mut self.ops);
        for op in ops.iter().rev() {
            self.backward_op(op);
        }
        self.ops = ops;
    }

    fn take_out_grad(&self, out: ValueId) -> Option<Vec<f64>> {
        self.grads[out.0].clone()
    }

    fn accumulate(&mut self, id: ValueId, delta: &[f64]) {
        if !self.slots[id.0].needs_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => {
                for (gi, d) in g.iter_mut().zip(delta) {
                    *gi += d;
                }
            }
            None => self.grads[id.0] = Some(delta.to_vec()),
        }
    }

    fn backward_op(&mut self, op: &Op) {
        match op {
            Op::Matmul { a, b, out, m, k, n } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                if self.needs(*a) {
                    // dA = dOut * B^T
                    let mut d_a = vec![0.0; m * k];
                    kernels::matmul_bt_acc(&d_out, self.data(*b), &mut d_a, *m, *n, *k);
                    self.accumulate(*a, &d_a);
                }
                if self.needs(*b) {
                    // dB = A^T * dOut
                    let mut d_b = vec![0.0; k * n];
                    kernels::matmul_at_acc(self.data(*a), &d_out, &mut d_b, *k, *m, *n);
                    self.accumulate(*b, &d_b);
                }
            }
            Op::MatmulBt { a, b, out, m, k, n } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                if self.needs(*a) {
                    // dA = dOut * B
                    let mut d_a = vec![0.0; m * k];
                    kernels::matmul_acc(&d_out, self.data(*b), &mut d_a, *m, *n, *k);
                    self.accumulate(*a, &d_a);
                }
                if self.needs(*b) {
                    // dB = dOut^T * A
                    let mut d_b = vec![0.0; n * k];
                    kernels::matmul_at_acc(&d_out, self.data(*a), &mut d_b, *n, *m, *k);
                    self.accumulate(*b, &d_b);
                }
            }
            Op::Add { a, b, out } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                self.accumulate(*a, &d_out);
                self.accumulate(*b, &d_out);
            }
            Op::AddRowBroadcast { a, bias, out, rows, cols } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                self.accumulate(*a, &d_out);
                if self.needs(*bias) {
                    let mut d_bias = vec![0.0; *cols];
                    for r in 0..*rows {
                        for c in 0..*cols {
                            d_bias[c] += d_out[r * cols + c];
                        }
                    }
                    self.accumulate(*bias, &d_bias);
                }
            }
            Op::Mul { a, b, out } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                if self.needs(*a) {
                    let d_a: Vec<f64> = d_out.iter().zip(self.data(*b)).map(|(d, y)| d * y).collect();
                    self.accumulate(*a, &d_a);
                }
                if self.needs(*b) {
                    let d_b: Vec<f64> = d_out.iter().zip(self.data(*a)).map(|(d, x)| d * x).collect();
                    self.accumulate(*b, &d_b);
                }
            }
            Op::Scale { a, c, out } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let d_a: Vec<f64> = d_out.iter().map(|d| d * c).collect();
                self.accumulate(*a, &d_a);
            }
            Op::Gelu { a, out } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let d_a: Vec<f64> = d_out
                    .iter()
                    .zip(self.data(*a))
                    .map(|(d, &x)| d * kernels::gelu_derivative(x))
                    .collect();
                self.accumulate(*a, &d_a);
            }
            Op::LayerNorm { x, gain, bias, out, rows, cols, mean, rstd } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let cols_f = *cols as f64;
                let x_data = self.data(*x).to_vec();
                let g_data = self.data(*gain).to_vec();
                let mut d_x = vec![0.0; rows * cols];
                let mut d_gain = vec![0.0; *cols];
                let mut d_bias = vec![0.0; *cols];
                for r in 0..*rows {
                    let xr = &x_data[r * cols..(r + 1) * cols];
                    let dor = &d_out[r * cols..(r + 1) * cols];
                    let (mu, rs) = (mean[r], rstd[r]);
                    // dxhat and the two row means needed by the LN backward rule
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for c in 0..*cols {
                        let xhat = (xr[c] - mu) * rs;
                        let dxhat = dor[c] * g_data[c];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        d_gain[c] += dor[c] * xhat;
                        d_bias[c] += dor[c];
                    }
                    for c in 0..*cols {
                        let xhat = (xr[c] - mu) * rs;
                        let dxhat = dor[c] * g_data[c];
                        d_x[r * cols + c] =
                            rs * (dxhat - sum_dxhat / cols_f - xhat * sum_dxhat_xhat / cols_f);
                    }
                }
                self.accumulate(*x, &d_x);
                self.accumulate(*gain, &d_gain);
                self.accumulate(*bias, &d_bias);
            }
            Op::SoftmaxRows { x, out, rows, cols } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let y = self.data(*out).to_vec();
                let mut d_x = vec![0.0; rows * cols];
                for r in 0..*rows {
                    let base = r * cols;
                    let dot: f64 = (0..*cols).map(|c| d_out[base + c] * y[base + c]).sum();
                    for c in 0..*cols {
                        d_x[base + c] = y[base + c] * (d_out[base + c] - dot);
                    }
                }
                self.accumulate(*x, &d_x);
            }
            Op::Attention { q, k, v, out, heads, n, dim, keysets, scale, probs } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let model_dim = heads * dim;
                let pairs = keysets.pair_count();
                let qd = self.data(*q).to_vec();
                let kd = self.data(*k).to_vec();
                let vd = self.data(*v).to_vec();
                let mut d_q = vec![0.0; n * model_dim];
                let mut d_k = vec![0.0; n * model_dim];
                let mut d_v = vec![0.0; n * model_dim];
                let mut d_alpha = Vec::new();
                for h in 0..*heads {
                    let col0 = h * dim;
                    for i in 0..*n {
                        let allowed = keysets.row(i);
                        if allowed.is_empty() {
                            continue;
                        }
                        let base = h * pairs + keysets.offsets[i];
                        let d_out_row = &d_out[i * model_dim + col0..i * model_dim + col0 + dim];
                        d_alpha.clear();
                        d_alpha.resize(allowed.len(), 0.0);
                        // d_alpha_j = dOut_i . v_j ; d_v_j += alpha_j * dOut_i
                        for (a, &j) in allowed.iter().enumerate() {
                            let j = j as usize;
                            let v_row = &vd[j * model_dim + col0..j * model_dim + col0 + dim];
                            d_alpha[a] = kernels::dot(d_out_row, v_row);
                            let alpha = probs[base + a];
                            let dvj = &mut d_v[j * model_dim + col0..j * model_dim + col0 + dim];
                            for d in 0..*dim {
                                dvj[d] += alpha * d_out_row[d];
                            }
                        }
                        // softmax VJP: ds = alpha .* (d_alpha - sum(alpha .* d_alpha))
                        let dot: f64 = (0..allowed.len())
                            .map(|a| probs[base + a] * d_alpha[a])
                            .sum();
                        for (a, &j) in allowed.iter().enumerate() {
                            let j = j as usize;
                            let ds = probs[base + a] * (d_alpha[a] - dot) * scale;
                            let k_row = &kd[j * model_dim + col0..j * model_dim + col0 + dim];
                            let q_row = &qd[i * model_dim + col0..i * model_dim + col0 + dim];
                            let dqi = &mut d_q[i * model_dim + col0..i * model_dim + col0 + dim];
                            for d in 0..*dim {
                                dqi[d] += ds * k_row[d];
                            }
                            let dkj = &mut d_k[j * model_dim + col0..j * model_dim + col0 + dim];
                            for d in 0..*dim {
                                dkj[d] += ds * q_row[d];
                            }
                        }
                    }
                }
                self.accumulate(*q, &d_q);
                self.accumulate(*k, &d_k);
                self.accumulate(*v, &d_v);
            }
            Op::Gather { table, out, ids, dim } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                if !self.needs(*table) {
                    return;
                }
                let mut d_table = vec![0.0; self.numel(*table)];
                for (pos, &id) in ids.iter().enumerate() {
                    let id = id as usize;
                    for d in 0..*dim {
                        d_table[id * dim + d] += d_out[pos * dim + d];
                    }
                }
                self.accumulate(*table, &d_table);
            }
            Op::CrossEntropyMasked { logits, out, targets, masked, vocab } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                if !self.needs(*logits) {
                    return;
                }
                let seed = d_out[0];
                let inv_m = seed / masked.len() as f64;
                let logit_data = self.data(*logits).to_vec();
                let mut d_logits = vec![0.0; self.numel(*logits)];
                for &t in masked.iter() {
                    let row = &logit_data[t * vocab..(t + 1) * vocab];
                    let mut soft = row.to_vec();
                    kernels::softmax_inplace(&mut soft);
                    let d_row = &mut d_logits[t * vocab..(t + 1) * vocab];
                    for j in 0..*vocab {
                        d_row[j] = soft[j] * inv_m;
                    }
                    d_row[targets[t] as usize] -= inv_m;
                }
                self.accumulate(*logits, &d_logits);
            }
            Op::Dropout { x, out, mask } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let d_x: Vec<f64> = d_out.iter().zip(mask).map(|(d, m)| d * m).collect();
                self.accumulate(*x, &d_x);
            }
            Op::DotConst { x, out, c } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let d_x: Vec<f64> = c.iter().map(|ci| ci * d_out[0]).collect();
                self.accumulate(*x, &d_x);
            }
            Op::SumAll { x, out } => {
                let Some(d_out) = self.take_out_grad(*out) else { return };
                let d_x = vec![d_out[0]; self.numel(*x)];
                self.accumulate(*x, &d_x);
            }
        }
    }
}
