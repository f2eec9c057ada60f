//! Encoder weights, forward pass, and the tied-embedding MLM head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::build_attention_pattern;
use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{load_tensors, save_tensors, Tape, Tensor, ValueId};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy)]
struct LayerIdx {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln1_g: usize,
    ln1_b: usize,
    wf1: usize,
    bf1: usize,
    wf2: usize,
    bf2: usize,
    ln2_g: usize,
    ln2_b: usize,
}

#[derive(Debug, Clone)]
struct ParamLayout {
    tok: usize,
    pos: usize,
    head_bias: usize,
    layers: Vec<LayerIdx>,
}

impl ParamLayout {
    fn new(hidden_layers: usize) -> Self {
        let mut next = 0usize;
        let mut take = || {
            let i = next;
            next += 1;
            i
        };
        let tok = take();
        let pos = take();
        let head_bias = take();
        let layers = (0..hidden_layers)
            .map(|_| LayerIdx {
                wq: take(),
                bq: take(),
                wk: take(),
                bk: take(),
                wv: take(),
                bv: take(),
                wo: take(),
                bo: take(),
                ln1_g: take(),
                ln1_b: take(),
                wf1: take(),
                bf1: take(),
                wf2: take(),
                bf2: take(),
                ln2_g: take(),
                ln2_b: take(),
            })
            .collect();
        Self { tok, pos, head_bias, layers }
    }

    fn count(&self) -> usize {
        3 + self.layers.len() * 16
    }
}

/// The encoder's learned parameters plus their config.
pub struct EncoderWeights {
    pub config: ModelConfig,
    params: Vec<Tensor>,
    names: Vec<String>,
    layout: ParamLayout,
}

impl EncoderWeights {
    /// Gaussian init (std 0.02) for matrices and embeddings, zeros for
    /// biases, ones for layer-norm gains.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = ParamLayout::new(config.hidden_layers);
        let d = config.hidden_dim;
        let ff = config.ff_dim();
        let mut params = vec![Tensor::zeros(vec![1]); layout.count()];
        let mut names = vec![String::new(); layout.count()];

        let mut set = |idx: usize, name: String, tensor: Tensor| {
            params[idx] = tensor.with_grad();
            names[idx] = name;
        };
        set(
            layout.tok,
            "emb.tok".into(),
            Tensor::randn(vec![config.vocab_size, d], INIT_STD, &mut rng),
        );
        set(
            layout.pos,
            "emb.pos".into(),
            Tensor::randn(vec![config.block_size, d], INIT_STD, &mut rng),
        );
        set(layout.head_bias, "head.bias".into(), Tensor::zeros(vec![config.vocab_size]));
        for (i, l) in layout.layers.iter().enumerate() {
            let mut mat = |idx: usize, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
                params[idx] = Tensor::randn(vec![rows, cols], INIT_STD, rng).with_grad();
                names[idx] = format!("layer.{i}.{name}");
            };
            mat(l.wq, "attn.wq", d, d, &mut rng);
            mat(l.wk, "attn.wk", d, d, &mut rng);
            mat(l.wv, "attn.wv", d, d, &mut rng);
            mat(l.wo, "attn.wo", d, d, &mut rng);
            mat(l.wf1, "ff.w1", d, ff, &mut rng);
            mat(l.wf2, "ff.w2", ff, d, &mut rng);
            let mut vec_param = |idx: usize, name: &str, tensor: Tensor| {
                params[idx] = tensor.with_grad();
                names[idx] = format!("layer.{i}.{name}");
            };
            vec_param(l.bq, "attn.bq", Tensor::zeros(vec![d]));
            vec_param(l.bk, "attn.bk", Tensor::zeros(vec![d]));
            vec_param(l.bv, "attn.bv", Tensor::zeros(vec![d]));
            vec_param(l.bo, "attn.bo", Tensor::zeros(vec![d]));
            vec_param(l.bf1, "ff.b1", Tensor::zeros(vec![ff]));
            vec_param(l.bf2, "ff.b2", Tensor::zeros(vec![d]));
            vec_param(l.ln1_g, "ln1.gain", Tensor::full(vec![d], 1.0));
            vec_param(l.ln1_b, "ln1.bias", Tensor::zeros(vec![d]));
            vec_param(l.ln2_g, "ln2.gain", Tensor::full(vec![d], 1.0));
            vec_param(l.ln2_b, "ln2.bias", Tensor::zeros(vec![d]));
        }
        Ok(Self { config, params, names, layout })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn param(&self, idx: usize) -> &Tensor {
        &self.params[idx]
    }

    pub fn param_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.params[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Writes weights to `path` and the config to `path` + ".json".
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let entries: Vec<(String, &Tensor)> = self
            .names
            .iter()
            .cloned()
            .zip(self.params.iter())
            .collect();
        save_tensors(path, &entries)?;
        self.config.save(&config_sidecar(path))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let config = ModelConfig::load(&config_sidecar(path))?;
        let mut loaded: std::collections::BTreeMap<String, Tensor> =
            load_tensors(path)?.into_iter().collect();
        let template = Self::init(config.clone(), 0)?;
        let mut params = Vec::with_capacity(template.params.len());
        for (name, expected) in template.names.iter().zip(&template.params) {
            let tensor = loaded.remove(name).ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                reason: format!("missing tensor {name}"),
            })?;
            if tensor.shape() != expected.shape() {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    reason: format!(
                        "tensor {name}: shape {:?} does not match config {:?}",
                        tensor.shape(),
                        expected.shape()
                    ),
                });
            }
            params.push(tensor.with_grad());
        }
        Ok(Self {
            config,
            params,
            names: template.names,
            layout: template.layout,
        })
    }
}

fn config_sidecar(path: &std::path::Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Whether dropout is live. Evaluation and gradient checking run in `Eval`.
#[derive(Debug, Clone, Copy)]
pub enum ForwardMode {
    Eval,
    Train { dropout_seed: u64 },
}

/// A completed forward pass: the tape plus handles into it.
pub struct EncoderForward {
    pub tape: Tape,
    pub hidden: ValueId,
    param_vids: Vec<ValueId>,
    tok_index: usize,
    head_bias_index: usize,
}

impl EncoderForward {
    pub fn hidden_tensor(&self) -> Tensor {
        self.tape.to_tensor(self.hidden)
    }

    /// Gradient for parameter `idx` after a backward pass.
    pub fn param_grad(&self, idx: usize) -> Option<&[f64]> {
        self.tape.grad(self.param_vids[idx])
    }
}

/// Runs token + position embedding and the stack of windowed-attention
/// blocks. `ids` and `validity` describe one sequence of length n <=
/// block_size; hidden states come back as an n x hidden_dim value.
pub fn encoder_forward(
    weights: &EncoderWeights,
    ids: &[u32],
    validity: &[bool],
    mode: ForwardMode,
) -> Result<EncoderForward> {
    let mut tape = Tape::new();
    let param_vids: Vec<ValueId> = weights.params.iter().map(|p| tape.input(p)).collect();
    let hidden = forward_on_tape(
        &mut tape,
        &weights.config,
        &weights.layout,
        &param_vids,
        ids,
        validity,
        mode,
    )?;
    Ok(EncoderForward {
        tape,
        hidden,
        param_vids,
        tok_index: weights.layout.tok,
        head_bias_index: weights.layout.head_bias,
    })
}

/// MLM head: hidden states projected to vocabulary logits with the output
/// weights tied to the input embedding table.
pub fn mlm_logits(forward: &mut EncoderForward) -> Result<ValueId> {
    let tok = forward.param_vids[forward.tok_index];
    let bias = forward.param_vids[forward.head_bias_index];
    let scores = forward.tape.matmul_bt(forward.hidden, tok)?;
    forward.tape.add_row_broadcast(scores, bias)
}

fn forward_on_tape(
    tape: &mut Tape,
    config: &ModelConfig,
    layout: &ParamLayout,
    vids: &[ValueId],
    ids: &[u32],
    validity: &[bool],
    mode: ForwardMode,
) -> Result<ValueId> {
    let n = ids.len();
    if n == 0 {
        return Err(Error::EmptyInput("encoder forward over zero tokens"));
    }
    if n > config.block_size {
        return Err(Error::SequenceTooLong { len: n, block_size: config.block_size });
    }
    if validity.len() != n {
        return Err(Error::ShapeMismatch {
            op: "encoder_forward",
            lhs: vec![n],
            rhs: vec![validity.len()],
        });
    }
    for &id in ids {
        if id as usize >= config.vocab_size {
            return Err(Error::Config(format!(
                "token id {id} outside vocabulary of size {}",
                config.vocab_size
            )));
        }
    }
    let pattern = build_attention_pattern(
        n,
        config.window,
        config.dilation,
        &config.global_positions,
        validity,
        config.strict_window,
    )?;
    let keysets = pattern.keysets();
    let scale = 1.0 / (config.head_dim() as f64).sqrt();

    let mut dropout_rng = match mode {
        ForwardMode::Train { dropout_seed } if config.dropout > 0.0 => {
            Some(ChaCha8Rng::seed_from_u64(dropout_seed))
        }
        _ => None,
    };
    let keep = 1.0 - config.dropout;

    let token_ids = std::rc::Rc::new(ids.to_vec());
    let pos_ids = std::rc::Rc::new((0..n as u32).collect::<Vec<u32>>());
    let tok_emb = tape.gather(vids[layout.tok], token_ids)?;
    let pos_emb = tape.gather(vids[layout.pos], pos_ids)?;
    let mut x = tape.add(tok_emb, pos_emb)?;

    for layer in &layout.layers {
        let linear = |tape: &mut Tape, x: ValueId, w: usize, b: usize| -> Result<ValueId> {
            let prod = tape.matmul(x, vids[w])?;
            tape.add_row_broadcast(prod, vids[b])
        };
        let q = linear(tape, x, layer.wq, layer.bq)?;
        let k = linear(tape, x, layer.wk, layer.bk)?;
        let v = linear(tape, x, layer.wv, layer.bv)?;
        let attn = tape.windowed_attention(q, k, v, config.heads, keysets.clone(), scale)?;
        let mut proj = linear(tape, attn, layer.wo, layer.bo)?;
        if let Some(rng) = dropout_rng.as_mut() {
            proj = tape.dropout(proj, keep, rng);
        }
        let res1 = tape.add(x, proj)?;
        x = tape.layer_norm(res1, vids[layer.ln1_g], vids[layer.ln1_b], LN_EPS)?;

        let inner = linear(tape, x, layer.wf1, layer.bf1)?;
        let act = tape.gelu(inner);
        let mut ff = linear(tape, act, layer.wf2, layer.bf2)?;
        if let Some(rng) = dropout_rng.as_mut() {
            ff = tape.dropout(ff, keep, rng);
        }
        let res2 = tape.add(x, ff)?;
        x = tape.layer_norm(res2, vids[layer.ln2_g], vids[layer.ln2_b], LN_EPS)?;
    }
    Ok(x)
}
