//! Experiment drivers: convergence-order studies, bound-validation sweeps
//! and the σ_z blow-up demonstration.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::single_step_bound;
use crate::error::{Error, Result};
use crate::evaluator::{apply_schedule, normalized_apply, product_deviation, Kappa, NormalizationSpec};
use crate::matrix::{distance, mat_exp, spectral_norm, ComplexMatrix, I};
use crate::operator::{estimate_lambda, LambdaOptions, TermSet};
use crate::oracle::{ordered_exp, piecewise_constant_exact};
use crate::schedule::lts_schedule;
use crate::systems;

/// Errors at or below this are treated as rounding noise.
pub fn noise_floor(dim: usize) -> f64 {
    1e3 * f64::EPSILON * dim as f64
}

/// `n` points `10^e` with `e` evenly spaced over `[lo_exp, hi_exp]`.
pub fn log_grid(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo_exp)];
    }
    (0..n).map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64)).collect()
}

/// The 12-point grid `10^{-2.5} ..= 10^{-0.5}` used for the two `fig1` systems.
pub fn fig1_grid() -> Vec<f64> {
    log_grid(-2.5, -0.5, 12)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
}

/// Least-squares fit of `log y` against `log x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateFit("all coordinates must be positive and finite".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::DegenerateFit("x values do not span a range".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let std_error = if points.len() > 2 { (resid / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, intercept, std_error })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub dt: f64,
    pub error: f64,
    /// `error / dt^{2k+1}`.
    pub zeta: f64,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub system: String,
    pub k: u32,
    pub mu: f64,
    pub samples: Vec<Sample>,
    pub fitted_slope: f64,
    pub slope_std_error: f64,
    pub fit_range: (f64, f64),
    pub oracle_tol: f64,
    pub noise_floor: f64,
}

impl ConvergenceReport {
    pub fn kept(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| !s.excluded)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dt,error,zeta,excluded\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:e},{:e},{:e},{}", s.dt, s.error, s.zeta, u8::from(s.excluded));
        }
        let _ = writeln!(out, "# slope={}", self.fitted_slope);
        let _ = writeln!(out, "# k={}", self.k);
        let _ = writeln!(out, "# system={}", self.system);
        let _ = writeln!(out, "# mu={}", self.mu);
        let _ = writeln!(out, "# fit_range={:e}..{:e}", self.fit_range.0, self.fit_range.1);
        let _ = writeln!(out, "# slope_std_error={}", self.slope_std_error);
        let _ = writeln!(out, "# oracle_tol={:e}", self.oracle_tol);
        let _ = writeln!(out, "# noise_floor={:e}", self.noise_floor);
        out
    }
}

#[derive(Clone, Debug)]
pub struct OrderStudy {
    pub k: u32,
    pub mu: f64,
    pub dt_grid: Vec<f64>,
    pub oracle_tol: f64,
    /// Defaults to [`noise_floor`] of the system dimension.
    pub noise_floor: Option<f64>,
}

impl OrderStudy {
    pub fn new(k: u32, dt_grid: Vec<f64>) -> Self {
        Self { k, mu: 0.0, dt_grid, oracle_tol: 1e-13, noise_floor: None }
    }
}

/// Error of the k-th order product against the oracle over a dt grid, with
/// a log-log slope fitted above the noise floor.
pub fn order_study(ts: &TermSet, system: &str, study: &OrderStudy) -> Result<ConvergenceReport> {
    if study.dt_grid.len() < 8 {
        return Err(Error::InvalidArgument(format!("dt grid needs at least 8 points, got {}", study.dt_grid.len())));
    }
    if study.dt_grid.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidArgument("dt grid must be positive".into()));
    }
    let schedule = lts_schedule(ts.m(), study.k)?;
    let floor = study.noise_floor.unwrap_or_else(|| noise_floor(ts.dim()));
    let power = 2 * study.k as i32 + 1;
    let mut samples = study
        .dt_grid
        .par_iter()
        .map(|&dt| -> Result<Sample> {
            let approx = apply_schedule(&schedule, ts, study.mu, dt)?;
            let exact = ordered_exp(ts, study.mu, dt, study.oracle_tol)?.u;
            let error = distance(&approx, &exact);
            Ok(Sample { dt, error, zeta: error / dt.powi(power), excluded: !(error > floor) })
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let kept: Vec<(f64, f64)> = samples.iter().filter(|s| !s.excluded).map(|s| (s.dt, s.error)).collect();
    if kept.len() < 3 {
        return Err(Error::BelowNoiseFloor { kept: kept.len(), total: samples.len(), floor });
    }
    let fit = fit_slope(&kept)?;
    Ok(ConvergenceReport {
        system: system.to_string(),
        k: study.k,
        mu: study.mu,
        fit_range: (kept[0].0, kept[kept.len() - 1].0),
        samples,
        fitted_slope: fit.slope,
        slope_std_error: fit.std_error,
        oracle_tol: study.oracle_tol,
        noise_floor: floor,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub seed: u64,
    pub dt: f64,
    pub lambda: f64,
    pub error: f64,
    pub bound: f64,
    pub valid: bool,
    /// `bound / error`.
    pub margin: f64,
    /// Bound below the rounding floor: reported, not asserted.
    pub excluded: bool,
}

impl BoundRow {
    pub fn violates(&self) -> bool {
        self.valid && !self.excluded && self.error > self.bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSweep {
    pub system: String,
    pub k: u32,
    pub mu: f64,
    pub oracle_tol: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundSweep {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violates()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,dt,lambda,error,bound,valid,margin,excluded\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{},{:e},{:e},{},{:e},{}",
                r.seed,
                r.dt,
                r.lambda,
                r.error,
                r.bound,
                u8::from(r.valid),
                r.margin,
                u8::from(r.excluded)
            );
        }
        let _ = writeln!(out, "# violations={}", self.violations());
        let _ = writeln!(out, "# k={}", self.k);
        let _ = writeln!(out, "# system={}", self.system);
        out
    }
}

#[derive(Clone, Debug)]
pub struct BoundSweepOptions {
    pub k: u32,
    pub mu: f64,
    pub dt_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub oracle_tol: f64,
    /// Route non-contractive systems through the κ-shifted product.
    pub allow_noncontractive: Option<Kappa>,
}

/// Measured single-step error against the single-step bound, per seed and
/// dt. Λ is estimated on each interval `[μ, μ + dt]`.
pub fn bound_sweep(system: &str, opts: &BoundSweepOptions) -> Result<BoundSweep> {
    let seeds: Vec<Option<u64>> = if opts.seeds.is_empty() { vec![None] } else { opts.seeds.iter().copied().map(Some).collect() };
    let dt_max = opts.dt_grid.iter().copied().fold(0.0, f64::max);
    let mut rows = Vec::new();
    for seed in seeds {
        let ts = systems::resolve_seeded(system, seed)?;
        let schedule = lts_schedule(ts.m(), opts.k)?;
        let dissipation = ts.max_dissipativity(opts.mu, opts.mu + dt_max, 65)?;
        let kappa = if dissipation > 1e-12 {
            match &opts.allow_noncontractive {
                Some(k) => Some(k.clone()),
                None => return Err(Error::NonContractive(dissipation)),
            }
        } else {
            None
        };
        let floor = noise_floor(ts.dim());
        let seed_rows = opts
            .dt_grid
            .par_iter()
            .map(|&dt| -> Result<BoundRow> {
                let est = estimate_lambda(&ts, opts.mu, dt, 2 * opts.k as usize, LambdaOptions::default())?;
                let approx = match &kappa {
                    None => apply_schedule(&schedule, &ts, opts.mu, dt)?,
                    Some(k) => normalized_apply(&schedule, &ts, &NormalizationSpec::new(k.clone()), opts.mu, dt, 1)?.restored(),
                };
                let exact = ordered_exp(&ts, opts.mu, dt, opts.oracle_tol)?.u;
                let error = distance(&approx, &exact);
                let b = single_step_bound(opts.k, est.lambda, dt);
                Ok(BoundRow {
                    seed: seed.unwrap_or(0),
                    dt,
                    lambda: est.lambda,
                    error,
                    bound: b.bound,
                    valid: b.valid,
                    margin: if error > 0.0 { b.bound / error } else { f64::INFINITY },
                    excluded: b.bound < floor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(seed_rows);
    }
    Ok(BoundSweep { system: system.to_string(), k: opts.k, mu: opts.mu, oracle_tol: opts.oracle_tol, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixBReport {
    pub delta: f64,
    pub dt: f64,
    /// `U(λ, μ+Δλ/2) E U(μ+Δλ/2, μ)` with `E = exp(iδσ_y)`.
    pub matrix: ComplexMatrix,
    pub expected: ComplexMatrix,
    pub max_entry_error: f64,
    /// `|perturbed - exact|`, where the exact evolution is the identity.
    pub error_norm: f64,
    /// `|lower-left entry| = e^{dt} sin δ`.
    pub dominant_entry: f64,
}

/// `H = σ_z` on the first half of the interval and `-σ_z` on the second,
/// with a small unitary error `E` inserted at the midpoint.
pub fn appendix_b_demo(delta: f64, dt: f64) -> Result<AppendixBReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let z = ComplexMatrix::pauli_z();
    let e_gen = ComplexMatrix::pauli_y().scale_complex(I * delta);
    let matrix = piecewise_constant_exact(&[(z.clone(), dt / 2.0), (e_gen, 1.0), (-&z, dt / 2.0)])?;
    let (s, c) = delta.sin_cos();
    let expected = ComplexMatrix::from_real(2, &[c, (-dt).exp() * s, -dt.exp() * s, c])?;
    let max_entry_error = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (matrix.get(i, j) - expected.get(i, j)).norm())
        .fold(0.0, f64::max);
    Ok(AppendixBReport {
        delta,
        dt,
        error_norm: distance(&matrix, &ComplexMatrix::identity(2)),
        dominant_entry: matrix.get(1, 0).norm(),
        matrix,
        expected,
        max_entry_error,
    })
}

/// Ratios of consecutive error norms over a dt sequence.
pub fn appendix_b_growth(delta: f64, dts: &[f64]) -> Result<Vec<f64>> {
    let reports = dts.iter().map(|&dt| appendix_b_demo(delta, dt)).collect::<Result<Vec<_>>>()?;
    Ok(reports.windows(2).map(|w| w[1].error_norm / w[0].error_norm).collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProductErrorTrial {
    pub factors: usize,
    pub delta: f64,
    pub deviation: f64,
}

impl ProductErrorTrial {
    pub fn holds(&self) -> bool {
        self.deviation <= 2.0 * self.delta
    }
}

/// Random unitary `A_p` and `B_p = A_p + (δ/P) C_p` with `|C_p| <= 1`;
/// measures `|Π A_p - Π B_p|`.
pub fn product_error_trial<R: Rng>(rng: &mut R, dim: usize, factors: usize, delta: f64) -> Result<ProductErrorTrial> {
    let mut a = Vec::with_capacity(factors);
    let mut b = Vec::with_capacity(factors);
    for _ in 0..factors {
        let scale = rng.gen_range(0.1..3.0);
        let h = systems::random_hermitian_matrix(rng, dim, scale);
        let ap = mat_exp(&h.scale_complex(I))?;
        let raw = ComplexMatrix::new(
            dim,
            (0..dim * dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
        )?;
        let norm = spectral_norm(&raw);
        let c = raw.scale(rng.gen_range(0.0..=1.0) / norm);
        let bp = &ap + &c.scale(delta / factors as f64);
        a.push(ap);
        b.push(bp);
    }
    Ok(ProductErrorTrial { factors, delta, deviation: product_deviation(&a, &b)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn slope_examples() {
        let square: Vec<(f64, f64)> = [0.1, 0.2, 0.4, 0.8].iter().map(|&x| (x, x * x)).collect();
        assert_relative_eq!(fit_slope(&square).unwrap().slope, 2.0, epsilon = 1e-12);
        let flat: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&x| (x, 3.0)).collect();
        assert!(fit_slope(&flat).unwrap().slope.abs() < 1e-12);
        let synthetic: Vec<(f64, f64)> = log_grid(-3.0, 0.0, 8).into_iter().map(|x| (x, 3.0 * x.powf(4.5))).collect();
        assert!((fit_slope(&synthetic).unwrap().slope - 4.5).abs() < 1e-10);
        assert!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn grids() {
        let g = fig1_grid();
        assert_eq!(g.len(), 12);
        assert_relative_eq!(g[0], 10f64.powf(-2.5));
        assert_relative_eq!(g[11], 10f64.powf(-0.5));
    }

    #[test]
    fn k1_study_on_cos() {
        let study = OrderStudy::new(1, fig1_grid());
        let r = order_study(&systems::fig1b(), "fig1b", &study).unwrap();
        assert!((r.fitted_slope - 3.0).abs() < 0.3, "{}", r.fitted_slope);
        let csv = r.to_csv();
        assert!(csv.starts_with("dt,error,zeta,excluded\n"));
        assert!(csv.contains("# slope="));
        assert!(csv.contains("# k=1\n# system=fig1b\n"));
    }

    #[test]
    fn study_below_floor_is_rejected() {
        let ts = systems::fig1b();
        let mut study = OrderStudy::new(3, log_grid(-4.0, -3.0, 8));
        study.oracle_tol = 1e-12;
        assert!(matches!(order_study(&ts, "fig1b", &study), Err(Error::BelowNoiseFloor { .. })));
        assert!(order_study(&ts, "fig1b", &OrderStudy::new(1, vec![0.1, 0.2])).is_err());
    }

    #[test]
    fn blowup_examples() {
        let r = appendix_b_demo(0.0, 1.0).unwrap();
        assert!(r.error_norm < 1e-15);
        let r = appendix_b_demo(0.3, 1.7).unwrap();
        assert!(r.max_entry_error < 1e-12);
        assert_relative_eq!(r.matrix.get(1, 0).re, -(1.7f64.exp()) * 0.3f64.sin(), max_relative = 1e-13);
        let a = appendix_b_demo(0.01, 2.0).unwrap();
        let b = appendix_b_demo(0.01, 4.0).unwrap();
        assert!((b.dominant_entry / a.dominant_entry / 2f64.exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn product_error_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = rng.gen_range(1..=64);
            let delta = rng.gen_range(0.0..=0.5);
            assert!(product_error_trial(&mut rng, 3, p, delta).unwrap().holds());
        }
    }

    #[test]
    fn sweep_rejects_noncontractive() {
        let opts = BoundSweepOptions {
            k: 1,
            mu: 0.0,
            dt_grid: vec![0.01],
            seeds: vec![1],
            oracle_tol: 1e-12,
            allow_noncontractive: None,
        };
        assert!(matches!(bound_sweep("random-hermitian:1,3,2", &opts), Err(Error::NonContractive(_))));
        let shifted = BoundSweepOptions { allow_noncontractive: Some(Kappa::constant(2.0)), ..opts };
        let sweep = bound_sweep("random-hermitian:1,3,2", &shifted).unwrap();
        assert_eq!(sweep.rows.len(), 1);
    }
}
