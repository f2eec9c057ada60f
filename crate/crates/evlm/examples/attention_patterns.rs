//! Dilated sliding-window + global attention patterns and their linear
//! scaling in sequence length.
//!
//! ```bash
//! cargo run --release --example attention_patterns
//! ```

use evlm::model::build_attention_pattern;

fn main() -> anyhow::Result<()> {
    // a small pattern, row by row
    let n = 12;
    let pattern = build_attention_pattern(n, 4, 1, &[0], &vec![true; n], false)?;
    println!("n={n}, w=4, d=1, global at 0:");
    for i in 0..n {
        println!("  query {i:>2} -> keys {:?}", pattern.allowed(i));
    }

    // dilation spreads the same window over a longer reach
    let dilated = build_attention_pattern(n, 4, 3, &[], &vec![true; n], false)?;
    println!("\nwith dilation 3 (no globals):");
    for i in [0usize, 6, 11] {
        println!("  query {i:>2} -> keys {:?}", dilated.allowed(i));
    }

    // allowed-pair counts grow linearly, dense grows quadratically
    println!("\npair counts at w=64, global {{0}}:");
    println!("{:>6} {:>12} {:>12} {:>8}", "n", "windowed", "dense", "ratio");
    let mut prev: Option<usize> = None;
    for n in [256usize, 512, 1024, 2048] {
        let count = build_attention_pattern(n, 64, 1, &[0], &vec![true; n], false)?.pair_count();
        let ratio = prev.map(|p| count as f64 / p as f64);
        println!(
            "{n:>6} {count:>12} {:>12} {:>8}",
            n * n,
            ratio.map_or("-".to_string(), |r| format!("{r:.3}"))
        );
        prev = Some(count);
    }
    Ok(())
}
