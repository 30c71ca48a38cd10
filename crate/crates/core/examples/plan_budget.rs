//! Order selection and exponential budgets for a range of accuracy targets.

use ordexp::bounds::{choose_order, exponential_budget, plan, segment_count};

pub fn run() -> ordexp::Result<()> {
    println!("N(m=1,k=1,Λ=1,dt=1,ε=0.1) = {}", exponential_budget(1, 1, 1.0, 1.0, 0.1)?.n);
    println!("r(k=1,Λ=1,dt=1,ε=0.01) = {}", segment_count(1, 1.0, 1.0, 0.01)?.r);

    let (m, lambda, dt) = (3, 2.0, 10.0);
    println!("{:>8} {:>3} {:>8} {:>12}", "eps", "k", "r", "exps");
    for e in 1..=12 {
        let eps = 10f64.powi(-e);
        let p = plan(m, lambda, dt, eps, None, None)?;
        println!("{eps:>8.0e} {:>3} {:>8} {:>12}", p.k, p.r, p.n);
    }

    // a finite smoothness order caps k
    println!("choose_order with P=2 at ε=1e-12: {}", choose_order(lambda, dt, 1e-12, Some(2)));
    let p = plan(m, lambda, dt, 1e-8, None, None)?;
    println!("{}", serde_json::to_string_pretty(&p)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
