//! Empirical convergence order for the smooth (`fig1b`, cos u) and the
//! non-smooth (`fig1a`, u³ sin(1/u)) scalar systems. Writes the CSV
//! reports to the system temp directory.

use ordexp::harness::{fig1_grid, order_study, OrderStudy};
use ordexp::systems;

pub fn run() -> ordexp::Result<()> {
    for key in ["fig1b", "fig1a"] {
        let ts = systems::resolve(key)?;
        let report = order_study(&ts, key, &OrderStudy::new(2, fig1_grid()))?;
        println!("{key}, k=2: slope {:.3} ± {:.3}", report.fitted_slope, report.slope_std_error);
        for s in &report.samples {
            println!("  dt={:.4e} error={:.4e} zeta={:.4e}{}", s.dt, s.error, s.zeta, if s.excluded { " (excluded)" } else { "" });
        }
        let path = std::env::temp_dir().join(format!("order_study_{key}.csv"));
        std::fs::write(&path, report.to_csv())?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ordexp::Result<()> {
    run()
}
