//! Decomposing a two-term time-dependent generator and comparing the
//! product against the reference integrator as k and r grow.

use ordexp::evaluator::{segmented_apply, symmetry_defect};
use ordexp::matrix::distance;
use ordexp::oracle::ordered_exp;
use ordexp::schedule::lts_schedule;
use ordexp::systems;

pub fn run() -> ordexp::Result<()> {
    let ts = systems::resolve("random-antihermitian:11,4,2")?;
    let (mu, dt) = (0.2, 1.5);
    let exact = ordered_exp(&ts, mu, dt, 1e-13)?;
    println!("oracle: {} steps, est. error {:.2e}", exact.steps_taken, exact.est_error);

    println!("{:>3} {:>4} {:>12}", "k", "r", "error");
    for k in 1..=3 {
        let s = lts_schedule(ts.m(), k)?;
        for r in [1, 2, 4, 8] {
            let u = segmented_apply(&s, &ts, mu, dt, r)?;
            println!("{k:>3} {r:>4} {:>12.3e}", distance(&u, &exact.u));
        }
    }

    let s = lts_schedule(ts.m(), 2)?;
    println!("symmetry defect (k=2, dt=0.3): {:.2e}", symmetry_defect(&s, &ts, mu, 0.3)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
