//! Builds Lie-Trotter-Suzuki schedules and prints their structure.
//!
//! `cargo run --example schedule_generation`

use ordexp::schedule::{lts_schedule, q_k, q_max, s_coefficient};

pub fn run() -> ordexp::Result<()> {
    let s = lts_schedule(2, 2)?;
    println!("m=2 k=2: {} factors", s.len());
    for (c, f) in s.factors().iter().enumerate().take(6) {
        println!("  #{c:<2} j={} v={:.6} q={:+.6}", f.term_index, f.offset, f.weight);
    }
    println!("  ...");
    for j in 1..=s.m() {
        println!("  weight sum for term {j}: {:.15}", s.weight_sum(j));
    }
    s.validate()?;

    for k in 1..=5 {
        let s = lts_schedule(1, k)?;
        println!("k={k}: s_k={:.10} Q_k={:.10} max|q|={:.10}", s_coefficient(k), q_k(k), q_max(&s));
    }

    // the JSON form is what external engines consume
    let json = serde_json::to_string(&lts_schedule(1, 1)?)?;
    println!("{json}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
