//! Estimating the smoothness constant Λ for a few systems, and what
//! happens when the requested derivative order is not available.

use ordexp::matrix::ComplexMatrix;
use ordexp::operator::{estimate_lambda, DerivativeMode, LambdaOptions, OperatorTerm, ScalarProfile, TermSet};
use ordexp::systems;

pub fn run() -> ordexp::Result<()> {
    // sin(2u)·σ_x: the p-th derivative has norm 2^p, so Λ = sup_p 2^{p/(p+1)}
    let ts = TermSet::single(OperatorTerm::from_profile(ScalarProfile::sin(2.0), ComplexMatrix::pauli_x()));
    for p in 0..=4 {
        let est = estimate_lambda(&ts, 0.0, 1.0, p, LambdaOptions::default())?;
        println!("sin(2u) p_max={p}: Λ={:.6} (raw {:.6}, dominant order {})", est.lambda, est.raw_lambda, est.dominant_order);
    }

    let fd = ts.clone().with_mode(DerivativeMode::FiniteDifference);
    let est = estimate_lambda(&fd, 0.0, 1.0, 4, LambdaOptions::default())?;
    println!("finite-difference mode, p_max=4: Λ={:.6}", est.lambda);

    let rough = systems::fig1a();
    println!("fig1a smoothness on [0, 0.1]: {}", rough.max_derivative_on(0.0, 0.1));
    println!("fig1a smoothness on [0.5, 0.6]: {}", rough.max_derivative_on(0.5, 0.6));
    match estimate_lambda(&rough, 0.0, 0.1, 2, LambdaOptions::default()) {
        Ok(e) => println!("unexpected: {e:?}"),
        Err(e) => println!("p_max=2 across u=0 rejected: {e}"),
    }

    let sys = systems::resolve("random-antihermitian:7,4,2")?;
    let est = estimate_lambda(&sys, 0.0, 0.5, 4, LambdaOptions::default())?;
    println!("random-antihermitian:7,4,2 on [0, 0.5], p_max=4: Λ={:.6}", est.lambda);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
