use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ordexp::bounds::{plan, qk_bounds};
use ordexp::evaluator::{normalized_apply, segmented_apply, Kappa, NormalizationSpec};
use ordexp::harness::{appendix_b_demo, bound_sweep, log_grid, order_study, BoundSweepOptions, OrderStudy};
use ordexp::matrix::{distance, ComplexMatrix};
use ordexp::oracle::ordered_exp;
use ordexp::schedule::{lts_schedule, q_k};
use ordexp::systems::{parse_kappa, resolve_seeded};

#[derive(Parser)]
#[command(name = "ordexp", version, about = "Product-formula decomposition of ordered operator exponentials")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for the random system families.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Absolute tolerance of the reference integrator.
    #[arg(long, global = true, default_value_t = 1e-13)]
    oracle_tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the factor list of the k-th order formula.
    Schedule {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: u32,
    },
    /// Tabulate Q_k against its lower and upper brackets.
    Qk {
        #[arg(long, default_value_t = 10)]
        max_k: u32,
    },
    /// Choose k, r and the exponential count for a target accuracy.
    Plan {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        epsilon: f64,
        /// Smoothness order available (largest admissible k).
        #[arg(long)]
        p: Option<u32>,
        /// Force this order instead of choosing one.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Evaluate the segmented product for a system and compare with the oracle.
    Decompose {
        #[arg(long)]
        system: String,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        dt: f64,
        /// Scalar shift: zero, const:c, linear:a,b or profile JSON.
        #[arg(long)]
        kappa: Option<String>,
    },
    /// Fit the empirical convergence order over a log-spaced dt grid.
    OrderStudy {
        #[arg(long)]
        system: String,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = -2.5, allow_hyphen_values = true)]
        lo_exp: f64,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        hi_exp: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        /// Fail unless the fitted slope is within --slope-tol of this.
        #[arg(long)]
        expect_slope: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        slope_tol: f64,
    },
    /// Compare single-step errors with the a-priori bound across seeds.
    BoundSweep {
        #[arg(long, default_value = "random-antihermitian")]
        system: String,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        lo_exp: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        hi_exp: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Number of consecutive seeds, starting at --seed (default 0).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        allow_noncontractive: bool,
        /// Shift used with --allow-noncontractive.
        #[arg(long, default_value = "zero")]
        kappa: String,
    },
    /// Evaluate the σ_z blow-up example with a midpoint perturbation.
    AppendixB {
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        dt: f64,
    },
}

struct Output {
    text: String,
    ok: bool,
}

fn json<T: Serialize>(value: &T) -> ordexp::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Serialize)]
struct QkRow {
    k: u32,
    q_k: f64,
    lower: f64,
    upper: f64,
    within: bool,
}

#[derive(Serialize)]
struct Decomposition {
    system: String,
    k: u32,
    r: usize,
    mu: f64,
    dt: f64,
    product: ComplexMatrix,
    k_factor: Option<f64>,
    error: f64,
    oracle_est_error: f64,
}

fn run(cli: &Cli) -> ordexp::Result<Output> {
    let csv = cli.format == Format::Csv;
    match &cli.command {
        Command::Schedule { m, k } => {
            let s = lts_schedule(*m, *k)?;
            let text = if csv {
                let mut t = String::from("j,v,q\n");
                for f in s.factors() {
                    let _ = writeln!(t, "{},{:?},{:?}", f.term_index, f.offset, f.weight);
                }
                t
            } else {
                json(&s)?
            };
            Ok(Output { text, ok: true })
        }
        Command::Qk { max_k } => {
            let rows: Vec<QkRow> = (1..=*max_k)
                .map(|k| {
                    let (lower, upper) = qk_bounds(k);
                    let q = q_k(k);
                    QkRow { k, q_k: q, lower, upper, within: lower <= q && q <= upper }
                })
                .collect();
            let ok = rows.iter().all(|r| r.within);
            let text = if csv {
                let mut t = String::from("k,q_k,lower,upper\n");
                for r in &rows {
                    let _ = writeln!(t, "{},{:?},{:?},{:?}", r.k, r.q_k, r.lower, r.upper);
                }
                t
            } else {
                json(&rows)?
            };
            Ok(Output { text, ok })
        }
        Command::Plan { m, lambda, dt, epsilon, p, k } => {
            let p = plan(*m, *lambda, *dt, *epsilon, *p, *k)?;
            Ok(Output { text: json(&p)?, ok: true })
        }
        Command::Decompose { system, k, r, mu, dt, kappa } => {
            let ts = resolve_seeded(system, cli.seed)?;
            let s = lts_schedule(ts.m(), *k)?;
            let (product, k_factor) = match kappa {
                Some(id) => {
                    let spec = NormalizationSpec::new(Kappa::from_profile(parse_kappa(id)?));
                    let n = normalized_apply(&s, &ts, &spec, *mu, *dt, *r)?;
                    (n.restored(), Some(n.k_factor))
                }
                None => (segmented_apply(&s, &ts, *mu, *dt, *r)?, None),
            };
            let exact = ordered_exp(&ts, *mu, *dt, cli.oracle_tol)?;
            let out = Decomposition {
                system: system.clone(),
                k: *k,
                r: *r,
                mu: *mu,
                dt: *dt,
                error: distance(&product, &exact.u),
                oracle_est_error: exact.est_error,
                product,
                k_factor,
            };
            Ok(Output { text: json(&out)?, ok: true })
        }
        Command::OrderStudy { system, k, mu, lo_exp, hi_exp, points, expect_slope, slope_tol } => {
            let ts = resolve_seeded(system, cli.seed)?;
            let mut study = OrderStudy::new(*k, log_grid(*lo_exp, *hi_exp, *points));
            study.mu = *mu;
            study.oracle_tol = cli.oracle_tol;
            let report = order_study(&ts, system, &study)?;
            let ok = expect_slope.is_none_or(|e| (report.fitted_slope - e).abs() <= *slope_tol);
            if !ok {
                eprintln!("fitted slope {:.4} outside {} ± {}", report.fitted_slope, expect_slope.unwrap_or_default(), slope_tol);
            }
            let text = if csv { report.to_csv() } else { json(&report)? };
            Ok(Output { text, ok })
        }
        Command::BoundSweep { system, k, mu, lo_exp, hi_exp, points, seeds, allow_noncontractive, kappa } => {
            let first = cli.seed.unwrap_or(0);
            let opts = BoundSweepOptions {
                k: *k,
                mu: *mu,
                dt_grid: log_grid(*lo_exp, *hi_exp, *points),
                seeds: (first..first + seeds).collect(),
                oracle_tol: cli.oracle_tol,
                allow_noncontractive: if *allow_noncontractive { Some(Kappa::from_profile(parse_kappa(kappa)?)) } else { None },
            };
            let sweep = bound_sweep(system, &opts)?;
            let violations = sweep.violations();
            if violations > 0 {
                eprintln!("{violations} rows exceed the bound");
            }
            let text = if csv { sweep.to_csv() } else { json(&sweep)? };
            Ok(Output { text, ok: violations == 0 })
        }
        Command::AppendixB { delta, dt } => {
            let report = appendix_b_demo(*delta, *dt)?;
            let ok = report.max_entry_error <= 1e-12;
            let text = if csv {
                format!(
                    "delta,dt,max_entry_error,error_norm,dominant_entry\n{:?},{:?},{:e},{:e},{:e}\n",
                    report.delta, report.dt, report.max_entry_error, report.error_norm, report.dominant_entry
                )
            } else {
                json(&report)?
            };
            Ok(Output { text, ok })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &output.text),
        None => {
            print!("{}", output.text);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if output.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
