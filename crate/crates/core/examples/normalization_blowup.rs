//! Two things about non-unitary evolutions: a tiny midpoint error under
//! H = ±σ_z grows like e^{dt}, and a scalar shift κ can be divided out
//! and restored exactly.

use ordexp::evaluator::{check_shifted_spectrum, normalized_apply, segmented_apply, Kappa, NormalizationSpec};
use ordexp::harness::{appendix_b_demo, appendix_b_growth};
use ordexp::matrix::distance;
use ordexp::schedule::lts_schedule;
use ordexp::systems;

pub fn run() -> ordexp::Result<()> {
    let delta = 0.01;
    for dt in [1.0, 2.0, 4.0, 8.0] {
        let r = appendix_b_demo(delta, dt)?;
        println!("dt={dt}: |error|={:.4e}, lower-left={:.4e}, closed-form mismatch {:.1e}", r.error_norm, r.dominant_entry, r.max_entry_error);
    }
    let ratios = appendix_b_growth(delta, &[2.0, 4.0, 6.0])?;
    println!("growth per +2 in dt: {:.4?} (e^2 = {:.4})", ratios, 2f64.exp());

    let ts = systems::resolve("random-hermitian:5,3,2")?;
    let s = lts_schedule(ts.m(), 2)?;
    let kappa = Kappa::constant(1.5);
    println!("shifted spectrum violations with κ=1.5: {}", check_shifted_spectrum(&ts, &kappa, 0.0, 1.0, 33)?.len());
    let n = normalized_apply(&s, &ts, &NormalizationSpec::new(kappa), 0.0, 1.0, 4)?;
    let plain = segmented_apply(&s, &ts, 0.0, 1.0, 4)?;
    println!("K={:.15}, restored vs plain: {:.2e}", n.k_factor, distance(&n.restored(), &plain));
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
