//! Adam with decoupled weight decay.

use crate::model::EncoderWeights;

/// Per-parameter gradient accumulation buffers, aligned with the encoder's
/// parameter indices.
pub struct GradAccum {
    bufs: Vec<Vec<f64>>,
}

impl GradAccum {
    pub fn new(weights: &EncoderWeights) -> Self {
        let bufs = (0..weights.n_params())
            .map(|i| vec![0.0; weights.param(i).numel()])
            .collect();
        Self { bufs }
    }

    pub fn add(&mut self, idx: usize, grad: &[f64]) {
        debug_assert_eq!(self.bufs[idx].len(), grad.len());
        for (b, g) in self.bufs[idx].iter_mut().zip(grad) {
            *b += g;
        }
    }

    pub fn buf(&self, idx: usize) -> &[f64] {
        &self.bufs[idx]
    }

    pub fn zero(&mut self) {
        for buf in &mut self.bufs {
            buf.fill(0.0);
        }
    }
}

/// AdamW: the decay term multiplies the parameter directly instead of being
/// folded into the gradient. Applied to all parameters.
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64, weights: &EncoderWeights) -> Self {
        let zeros = |w: &EncoderWeights| {
            (0..w.n_params()).map(|i| vec![0.0; w.param(i).numel()]).collect()
        };
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: zeros(weights),
            v: zeros(weights),
            t: 0,
        }
    }

    pub fn step(&mut self, weights: &mut EncoderWeights, grads: &GradAccum) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for idx in 0..weights.n_params() {
            let grad = grads.buf(idx);
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let data = weights.param_mut(idx).data_mut();
            for e in 0..data.len() {
                m[e] = self.beta1 * m[e] + (1.0 - self.beta1) * grad[e];
                v[e] = self.beta2 * v[e] + (1.0 - self.beta2) * grad[e] * grad[e];
                let m_hat = m[e] / bc1;
                let v_hat = v[e] / bc2;
                data[e] -= self.learning_rate * (m_hat / (v_hat.sqrt() + self.eps))
                    + self.learning_rate * self.weight_decay * data[e];
            }
        }
    }
}
