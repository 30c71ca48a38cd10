//! Measured single-step errors against the a-priori bound on random
//! unitary systems.

use ordexp::bounds::single_step_threshold;
use ordexp::harness::{bound_sweep, log_grid, BoundSweepOptions};
use ordexp::operator::{estimate_lambda, LambdaOptions};
use ordexp::systems;

pub fn run() -> ordexp::Result<()> {
    let ts = systems::resolve("random-antihermitian:0,4,2")?;
    let lambda = estimate_lambda(&ts, 0.0, 0.1, 2, LambdaOptions::default())?.lambda;
    println!("Λ≈{lambda:.4}, k=1 validity threshold dt ≤ {:.4}", single_step_threshold(1, lambda));

    for k in [1, 2] {
        let opts = BoundSweepOptions {
            k,
            mu: 0.0,
            dt_grid: log_grid(-3.0, -1.0, 5),
            seeds: (0..3).collect(),
            oracle_tol: 1e-13,
            allow_noncontractive: None,
        };
        let sweep = bound_sweep("random-antihermitian:0,4,2", &opts)?;
        let worst = sweep.rows.iter().filter(|r| r.valid && !r.excluded).map(|r| r.margin).fold(f64::INFINITY, f64::min);
        println!("k={k}: {} rows, {} violations, smallest margin {worst:.3e}", sweep.rows.len(), sweep.violations());
    }

    // a Hermitian generator grows norms, so the sweep refuses it
    let opts = BoundSweepOptions {
        k: 1,
        mu: 0.0,
        dt_grid: vec![0.01],
        seeds: vec![1],
        oracle_tol: 1e-13,
        allow_noncontractive: None,
    };
    if let Err(e) = bound_sweep("random-hermitian", &opts) {
        println!("random-hermitian: {e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
