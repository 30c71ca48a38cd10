//! Taylor coefficients of the ordered exponential and the truncation
//! remainder check.

use ordexp::matrix::ComplexMatrix;
use ordexp::operator::{OperatorTerm, ScalarProfile, TermSet};
use ordexp::oracle::{bell_number, taylor_terms, taylor_words, truncation_bound_check};

pub fn run() -> ordexp::Result<()> {
    let words = taylor_words(4);
    for (p, w) in words.iter().enumerate() {
        let total: u64 = w.values().sum();
        println!("T_{p}: {} distinct words, coefficients sum to {total} (Bell {})", w.len(), bell_number(p));
    }
    // T_2 = H² + H'
    for (word, c) in &words[2] {
        println!("  {c} × {word:?}");
    }

    let ts = TermSet::single(OperatorTerm::from_profile(ScalarProfile::cos(), ComplexMatrix::pauli_x()));
    let t = taylor_terms(&ts, 0.3, 3)?;
    println!("|T_3(0.3)| = {:.6}", ordexp::matrix::spectral_norm(&t[3]));

    for p in [1, 2, 3] {
        for dt in [0.05, 0.1, 0.2] {
            let c = truncation_bound_check(&ts, 0.3, dt, p, 1e-13)?;
            println!("P={p} dt={dt}: remainder {:.3e} <= bound {:.3e}: {}", c.lhs, c.rhs, c.holds());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
