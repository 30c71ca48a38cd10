//! Dense complex matrix exponentials and norms.

use ordexp::matrix::{distance, mat_exp, spectral_norm, ComplexMatrix, I};

pub fn run() -> ordexp::Result<()> {
    let theta = 0.7;
    // exp(-iθσ_y) is a real rotation
    let rot = mat_exp(&ComplexMatrix::pauli_y().scale_complex(-I * theta))?;
    let expected = ComplexMatrix::from_real(2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])?;
    println!("rotation error: {:.3e}", distance(&rot, &expected));
    println!("|U| = {:.15}", spectral_norm(&rot));

    let big = ComplexMatrix::from_real(2, &[-40.0, 1.0, 0.0, -41.0])?;
    let e = mat_exp(&big)?;
    println!("exp of stiff upper-triangular: [{:.3e}, {:.3e}; {:.3e}, {:.3e}]",
        e.get(0, 0).re, e.get(0, 1).re, e.get(1, 0).re, e.get(1, 1).re);

    let d = ComplexMatrix::from_diagonal(&[1.0.into(), (-2.0).into(), (0.5 * I)])?;
    let ed = mat_exp(&d)?;
    println!("diag: {:.12} {:.12} {:.12}", ed.get(0, 0), ed.get(1, 1), ed.get(2, 2));
    println!("{}", serde_json::to_string(&rot)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
