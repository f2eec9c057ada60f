//! Central-finite-difference gradient checking.

use super::tape::{Tape, ValueId};
use super::Tensor;
use crate::error::Result;

pub const DEFAULT_GRADCHECK_STEP: f64 = 1e-5;

/// Compares tape gradients against central finite differences for every
/// element of every `requires_grad` input and returns the maximum relative
/// error observed.
///
/// `f` rebuilds the computation from scratch on the given tape and returns a
/// scalar loss id; it is invoked once for the analytic pass and twice per
/// perturbed element. The relative error uses `max(|a|, |b|, 1.0)` as the
/// denominator so near-zero gradients are compared absolutely.
pub fn grad_check<F>(inputs: &[Tensor], step: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[ValueId]) -> Result<ValueId>,
{
    let eval = |points: &[Tensor]| -> Result<(f64, Vec<Option<Vec<f64>>>)> {
        let mut tape = Tape::new();
        let ids: Vec<ValueId> = points.iter().map(|t| tape.input(t)).collect();
        let loss = f(&mut tape, &ids)?;
        let value = tape.scalar(loss);
        tape.backward(loss);
        let grads = ids.iter().map(|&id| tape.grad(id).map(|g| g.to_vec())).collect();
        Ok((value, grads))
    };

    let (_, analytic) = eval(inputs)?;

    let mut max_rel = 0.0f64;
    let mut points: Vec<Tensor> = inputs.to_vec();
    for (idx, input) in inputs.iter().enumerate() {
        if !input.requires_grad {
            continue;
        }
        let grad = analytic[idx]
            .as_deref()
            .unwrap_or(&[])
            .to_vec();
        for e in 0..input.numel() {
            let original = input.data()[e];
            points[idx].data_mut()[e] = original + step;
            let (plus, _) = eval_value(&points, &f)?;
            points[idx].data_mut()[e] = original - step;
            let (minus, _) = eval_value(&points, &f)?;
            points[idx].data_mut()[e] = original;

            let fd = (plus - minus) / (2.0 * step);
            let g = if grad.is_empty() { 0.0 } else { grad[e] };
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

fn eval_value<F>(points: &[Tensor], f: &F) -> Result<(f64, ())>
where
    F: Fn(&mut Tape, &[ValueId]) -> Result<ValueId>,
{
    let mut tape = Tape::new();
    let ids: Vec<ValueId> = points.iter().map(|t| tape.input(t)).collect();
    let loss = f(&mut tape, &ids)?;
    Ok((tape.scalar(loss), ()))
}
