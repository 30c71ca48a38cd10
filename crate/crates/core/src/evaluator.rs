//! Numerical application of a [`Schedule`] to a [`TermSet`].

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{mat_exp, spectral_abscissa, spectral_norm, ComplexMatrix};
use crate::operator::{uniform_grid, ScalarProfile, TermSet};
use crate::schedule::Schedule;

fn check_compatible(s: &Schedule, ts: &TermSet) -> Result<()> {
    if s.m() != ts.m() {
        return Err(Error::TermCountMismatch { schedule: s.m(), terms: ts.m() });
    }
    Ok(())
}

fn check_step(dt: f64) -> Result<()> {
    if !dt.is_finite() {
        return Err(Error::NonFinite("step width".into()));
    }
    Ok(())
}

/// `Π_c exp(H_{j_c}(μ + v_c dt) q_c dt)`, first factor rightmost.
///
/// A negative `dt` evolves backward from `mu` to `mu + dt` through the same
/// code path.
pub fn apply_schedule(s: &Schedule, ts: &TermSet, mu: f64, dt: f64) -> Result<ComplexMatrix> {
    check_compatible(s, ts)?;
    check_step(dt)?;
    apply_shifted(s, ts, mu, dt, None)
}

fn apply_shifted(s: &Schedule, ts: &TermSet, mu: f64, dt: f64, kappa: Option<(&Kappa, f64)>) -> Result<ComplexMatrix> {
    let mut u = ComplexMatrix::identity(ts.dim());
    for f in s.factors() {
        let lambda = mu + f.offset * dt;
        let mut h = ts.term(f.term_index - 1).evaluate(lambda, 0)?;
        if let Some((kappa, m)) = kappa {
            let shift = kappa.value(lambda) / m;
            h.axpy(Complex64::new(-shift, 0.0), &ComplexMatrix::identity(ts.dim()));
        }
        let factor = mat_exp(&h.scale(f.weight * dt))?;
        u = &factor * &u;
    }
    Ok(u)
}

fn segment_starts(mu: f64, dt: f64, r: usize) -> impl Iterator<Item = (f64, f64)> {
    let width = dt / r as f64;
    (0..r).map(move |q| (mu + dt * q as f64 / r as f64, width))
}

/// `r` consecutive applications over sub-intervals of width `dt / r`, later
/// segments on the left.
pub fn segmented_apply(s: &Schedule, ts: &TermSet, mu: f64, dt: f64, r: usize) -> Result<ComplexMatrix> {
    check_compatible(s, ts)?;
    check_step(dt)?;
    if r == 0 {
        return Err(Error::InvalidArgument("segment count r must be at least 1".into()));
    }
    let mut u = ComplexMatrix::identity(ts.dim());
    for (start, width) in segment_starts(mu, dt, r) {
        u = &apply_shifted(s, ts, start, width, None)? * &u;
    }
    Ok(u)
}

/// A scalar shift `κ(λ)` with its non-smooth points.
#[derive(Clone)]
pub struct Kappa {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for Kappa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kappa").field("breakpoints", &self.breakpoints).finish_non_exhaustive()
    }
}

impl Kappa {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, breakpoints: Vec<f64>) -> Self {
        Self { f: Arc::new(f), breakpoints }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, Vec::new())
    }

    pub fn from_profile(profile: ScalarProfile) -> Self {
        let breakpoints = profile.singular_points();
        Self::new(move |u| profile.derivative(u, 0).unwrap_or(f64::NAN), breakpoints)
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

#[derive(Clone, Debug)]
pub struct NormalizationSpec {
    pub kappa: Kappa,
    pub quadrature_tol: f64,
}

impl NormalizationSpec {
    pub fn new(kappa: Kappa) -> Self {
        Self { kappa, quadrature_tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct NormalizedProduct {
    /// Product of the shifted exponentials `exp((H_j - κ/m) Δλ_c)`.
    pub product: ComplexMatrix,
    /// `exp(∫κ - Σ_c (κ(λ_c)/m) Δλ_c)`.
    pub k_factor: f64,
    pub kappa_integral: f64,
    /// `Σ_c (κ(λ_c)/m) Δλ_c` over every applied factor.
    pub kappa_sum: f64,
}

impl NormalizedProduct {
    /// `e^{∫κ}` times the shifted product, i.e. the approximation of the
    /// unshifted evolution. Equals `K` times the unshifted product.
    pub fn restored(&self) -> ComplexMatrix {
        self.product.scale(self.kappa_integral.exp())
    }
}

/// Applies the schedule to `H_j - (κ/m) I` and reports the scalar factor
/// relating it to the unshifted product.
///
/// Each of the `m` terms carries `κ/m`, so a constant κ gives `K = 1`
/// exactly (every term's weights sum to one).
pub fn normalized_apply(
    s: &Schedule,
    ts: &TermSet,
    norm: &NormalizationSpec,
    mu: f64,
    dt: f64,
    r: usize,
) -> Result<NormalizedProduct> {
    check_compatible(s, ts)?;
    check_step(dt)?;
    if r == 0 {
        return Err(Error::InvalidArgument("segment count r must be at least 1".into()));
    }
    let m = ts.m() as f64;
    let mut product = ComplexMatrix::identity(ts.dim());
    let mut kappa_sum = 0.0;
    for (start, width) in segment_starts(mu, dt, r) {
        product = &apply_shifted(s, ts, start, width, Some((&norm.kappa, m)))? * &product;
        kappa_sum += s
            .factors()
            .iter()
            .map(|f| norm.kappa.value(start + f.offset * width) / m * f.weight * width)
            .sum::<f64>();
    }
    let kappa_integral = adaptive_simpson(|x| norm.kappa.value(x), mu, mu + dt, norm.quadrature_tol, norm.kappa.breakpoints())?;
    Ok(NormalizedProduct { product, k_factor: (kappa_integral - kappa_sum).exp(), kappa_integral, kappa_sum })
}

/// A grid point where `H(u) - κ(u) I` has an eigenvalue with positive real
/// part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumViolation {
    pub u: f64,
    pub abscissa: f64,
}

/// Samples the shifted spectrum; an empty result means no violation was
/// seen (not a proof of contractivity).
pub fn check_shifted_spectrum(ts: &TermSet, kappa: &Kappa, mu: f64, dt: f64, grid_points: usize) -> Result<Vec<SpectrumViolation>> {
    let mut out = Vec::new();
    for u in uniform_grid(mu, mu + dt, grid_points) {
        let mut h = ts.sum_at(u)?;
        h.axpy(Complex64::new(-kappa.value(u), 0.0), &ComplexMatrix::identity(ts.dim()));
        let abscissa = spectral_abscissa(&h);
        if abscissa > 1e-12 {
            out.push(SpectrumViolation { u, abscissa });
        }
    }
    Ok(out)
}

/// `|Ũ(μ+dt, μ) Ũ(μ, μ+dt) - I|`, the reversed product evaluated by
/// feeding `-dt` from `μ + dt`.
pub fn symmetry_defect(s: &Schedule, ts: &TermSet, mu: f64, dt: f64) -> Result<f64> {
    let forward = apply_schedule(s, ts, mu, dt)?;
    let backward = apply_schedule(s, ts, mu + dt, -dt)?;
    Ok(spectral_norm(&(&(&forward * &backward) - &ComplexMatrix::identity(ts.dim()))))
}

/// `|Π A_p - Π B_p|` with the first element rightmost.
pub fn product_deviation(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument("factor lists must be non-empty and of equal length".into()));
    }
    let fold = |xs: &[ComplexMatrix]| xs.iter().skip(1).fold(xs[0].clone(), |acc, x| x * &acc);
    Ok(spectral_norm(&(&fold(a) - &fold(b))))
}

/// Adaptive Simpson quadrature, split at any breakpoints inside `(a, b)`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, breakpoints: &[f64]) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, tol, breakpoints).map(|v| -v);
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&x| a < x && x < b).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // Stay off the breakpoints themselves so one-sided values are used.
        let (lo_in, hi_in) = if cuts.len() > 2 { (lo.next_up(), hi.next_down()) } else { (lo, hi) };
        let g = |x: f64| f(x.clamp(lo_in, hi_in));
        let piece_tol = tol * (hi - lo) / (b - a);
        let (fa, fm, fb) = (g(lo), g(0.5 * (lo + hi)), g(hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        let mut shortfall = 0.0f64;
        total += simpson_step(&g, lo, hi, fa, fm, fb, whole, piece_tol, 50, &mut shortfall);
        if shortfall > piece_tol || !total.is_finite() {
            return Err(Error::Quadrature { tol, estimate: shortfall });
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    shortfall: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 {
        if depth == 0 {
            *shortfall = shortfall.max(delta.abs() / 15.0);
        }
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, shortfall)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, shortfall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::distance;
    use crate::operator::OperatorTerm;
    use crate::schedule::{lts_schedule, ExpFactor};
    use crate::systems;
    use approx::assert_relative_eq;

    fn constant_terms(ms: Vec<ComplexMatrix>) -> TermSet {
        TermSet::new(ms.into_iter().map(|m| OperatorTerm::from_profile(ScalarProfile::constant(1.0), m)).collect()).unwrap()
    }

    #[test]
    fn scalar_constant_is_exact() {
        let a = 0.7;
        let ts = constant_terms(vec![ComplexMatrix::identity(2).scale(a)]);
        for k in 1..=3 {
            let s = lts_schedule(1, k).unwrap();
            let exact = ComplexMatrix::identity(2).scale((a * 0.4f64).exp());
            // rounding budget: a few ulps per applied factor
            let budget = |factors: usize| 4.0 * f64::EPSILON * factors as f64 * spectral_norm(&exact);
            let u = apply_schedule(&s, &ts, 0.0, 0.4).unwrap();
            assert!(distance(&u, &exact) <= budget(s.len()));
            let seg = segmented_apply(&s, &ts, 0.0, 0.4, 7).unwrap();
            assert!(distance(&seg, &exact) <= budget(7 * s.len()));
        }
    }

    #[test]
    fn cos_first_order_value() {
        let ts = systems::fig1b();
        let s = lts_schedule(1, 1).unwrap();
        let dt = 0.2;
        let u = apply_schedule(&s, &ts, 0.0, dt).unwrap();
        assert_relative_eq!(u.get(0, 0).re, ((dt / 2.0).cos() * dt).exp(), max_relative = 1e-14);
    }

    #[test]
    fn strang_splitting_is_third_order_locally() {
        let ts = constant_terms(vec![ComplexMatrix::pauli_x(), ComplexMatrix::pauli_z()]);
        let s = lts_schedule(2, 1).unwrap();
        let dts = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let exact = mat_exp(&(&ComplexMatrix::pauli_x() + &ComplexMatrix::pauli_z()).scale(dt)).unwrap();
                distance(&apply_schedule(&s, &ts, 0.0, dt).unwrap(), &exact)
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 3.0).abs() < 0.1, "slope {slope}");
        }
    }

    #[test]
    fn segmented_with_one_segment_matches_single_step() {
        let ts = systems::random_hermitian(3, 3, 2).unwrap();
        let s = lts_schedule(2, 2).unwrap();
        assert_eq!(apply_schedule(&s, &ts, 0.1, 0.3).unwrap(), segmented_apply(&s, &ts, 0.1, 0.3, 1).unwrap());
    }

    #[test]
    fn term_count_mismatch() {
        let s = lts_schedule(2, 1).unwrap();
        assert!(matches!(
            apply_schedule(&s, &systems::fig1b(), 0.0, 0.1),
            Err(Error::TermCountMismatch { schedule: 2, terms: 1 })
        ));
    }

    #[test]
    fn symmetry_defects() {
        let diag = constant_terms(vec![ComplexMatrix::from_real(2, &[0.3, 0.0, 0.0, -1.2]).unwrap()]);
        assert!(symmetry_defect(&lts_schedule(1, 2).unwrap(), &diag, 0.0, 0.3).unwrap() < 1e-13);
        for k in 1..=3 {
            assert!(symmetry_defect(&lts_schedule(1, k).unwrap(), &systems::fig1b(), 0.0, 0.3).unwrap() < 1e-11);
        }
        let pair = constant_terms(vec![ComplexMatrix::pauli_x(), ComplexMatrix::pauli_z()]);
        let forward_half = Schedule::from_factors(
            2,
            1,
            vec![ExpFactor { term_index: 1, offset: 0.5, weight: 1.0 }, ExpFactor { term_index: 2, offset: 0.5, weight: 1.0 }],
        )
        .unwrap();
        let d1 = symmetry_defect(&forward_half, &pair, 0.0, 0.05).unwrap();
        let d2 = symmetry_defect(&forward_half, &pair, 0.0, 0.025).unwrap();
        assert!(d1 > 1e-3);
        assert!(((d1 / d2).log2() - 2.0).abs() < 0.1);
    }

    #[test]
    fn kappa_normalization() {
        let ts = systems::random_hermitian(1, 3, 2).unwrap();
        let s = lts_schedule(2, 2).unwrap();
        let plain = segmented_apply(&s, &ts, 0.0, 0.5, 3).unwrap();
        let zero = normalized_apply(&s, &ts, &NormalizationSpec::new(Kappa::constant(0.0)), 0.0, 0.5, 3).unwrap();
        assert_eq!(zero.k_factor, 1.0);
        assert!(distance(&zero.product, &plain) < 1e-15);
        let c = normalized_apply(&s, &ts, &NormalizationSpec::new(Kappa::constant(2.0)), 0.0, 0.5, 3).unwrap();
        assert!((c.k_factor - 1.0).abs() < 1e-12);
        assert!(distance(&c.restored(), &plain) < 1e-12 * spectral_norm(&plain));
    }

    #[test]
    fn linear_kappa_midpoint_rule() {
        let ts = systems::fig1b();
        let s = lts_schedule(1, 1).unwrap();
        let spec = NormalizationSpec::new(Kappa::from_profile(ScalarProfile::Polynomial { coeffs: vec![0.0, 1.0] }));
        let out = normalized_apply(&s, &ts, &spec, 0.0, 1.0, 1).unwrap();
        assert_relative_eq!(out.kappa_sum, 0.5, max_relative = 1e-15);
        assert_relative_eq!(out.kappa_integral, 0.5, max_relative = 1e-14);
        assert_relative_eq!(out.k_factor, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn shifted_product_identity_holds_for_any_kappa() {
        let ts = systems::random_hermitian(5, 2, 2).unwrap();
        let s = lts_schedule(2, 2).unwrap();
        let spec = NormalizationSpec::new(Kappa::from_profile(ScalarProfile::Exp { rate: 1.3 }));
        let out = normalized_apply(&s, &ts, &spec, 0.2, 0.7, 2).unwrap();
        let plain = segmented_apply(&s, &ts, 0.2, 0.7, 2).unwrap();
        assert!(distance(&out.restored(), &plain.scale(out.k_factor)) < 1e-12 * spectral_norm(&plain));
    }

    #[test]
    fn simpson_honours_breakpoints() {
        let step = ScalarProfile::Step { at: 0.3 };
        let v = adaptive_simpson(|x| step.derivative(x, 0).unwrap(), 0.0, 1.0, 1e-12, &[0.3]).unwrap();
        assert_relative_eq!(v, 0.3 - 0.7, max_relative = 1e-13);
        let w = adaptive_simpson(f64::cos, 1.0, 0.0, 1e-12, &[]).unwrap();
        assert_relative_eq!(w, -1f64.sin(), max_relative = 1e-12);
    }

    #[test]
    fn spectrum_check_reports_violations() {
        let ts = systems::random_hermitian(2, 3, 2).unwrap();
        assert!(!check_shifted_spectrum(&ts, &Kappa::constant(0.0), 0.0, 1.0, 17).unwrap().is_empty());
        assert!(check_shifted_spectrum(&ts, &Kappa::constant(3.0), 0.0, 1.0, 17).unwrap().is_empty());
    }

    #[test]
    fn antihermitian_products_are_unitary() {
        let ts = systems::random_antihermitian(4, 4, 2).unwrap();
        let s = lts_schedule(2, 2).unwrap();
        let u = segmented_apply(&s, &ts, 0.0, 1.0, 8).unwrap();
        assert!((spectral_norm(&u) - 1.0).abs() < 8e-12);
    }
}
