//! λ-dependent operator splittings `H(u) = Σ_j H_j(u)`.
//!
//! A term is either a sum of cataloged scalar profiles times constant
//! matrices (analytic derivatives of every order), or an arbitrary closure.
//! Each term declares how many derivatives it has on a given interval; any
//! request past that is an error rather than a silently wrong number.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, ComplexMatrix};

/// Declared differentiability class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    Finite(usize),
    Unbounded,
}

impl Smoothness {
    pub fn allows(self, p: usize) -> bool {
        match self {
            Smoothness::Finite(max) => p <= max,
            Smoothness::Unbounded => true,
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(p) => write!(f, "{p}"),
            Smoothness::Unbounded => write!(f, "infinitely"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

fn default_one() -> f64 {
    1.0
}

/// Cataloged scalar functions of `u`. There is no expression parser: custom
/// systems pick from this list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum ScalarProfile {
    Constant {
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `cos(omega u + phase)`
    Cos {
        #[serde(default = "default_one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `sin(omega u + phase)`
    Sin {
        #[serde(default = "default_one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Ascending coefficients.
    Polynomial { coeffs: Vec<f64> },
    /// `exp(rate u)`
    Exp {
        #[serde(default = "default_one")]
        rate: f64,
    },
    /// `u^3 sin(1/u)`, extended by 0 at `u = 0`. Once differentiable there.
    CubicSinInverse,
    /// `+1` for `u < at`, `-1` for `u >= at`.
    Step { at: f64 },
}

impl ScalarProfile {
    pub fn cos() -> Self {
        ScalarProfile::Cos { omega: 1.0, phase: 0.0 }
    }

    pub fn sin(omega: f64) -> Self {
        ScalarProfile::Sin { omega, phase: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        ScalarProfile::Constant { value }
    }

    /// Differentiability on `[a, b]`.
    pub fn smoothness_on(&self, a: f64, b: f64) -> Smoothness {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match self {
            ScalarProfile::CubicSinInverse if lo <= 0.0 && 0.0 <= hi => Smoothness::Finite(1),
            ScalarProfile::Step { at } if lo < *at && *at <= hi => Smoothness::Finite(0),
            _ => Smoothness::Unbounded,
        }
    }

    /// Points where the profile is not infinitely differentiable.
    pub fn singular_points(&self) -> Vec<f64> {
        match self {
            ScalarProfile::CubicSinInverse => vec![0.0],
            ScalarProfile::Step { at } => vec![*at],
            _ => Vec::new(),
        }
    }

    /// Length over which the profile changes appreciably near `u`; sets the
    /// finite-difference step.
    pub fn length_scale(&self, u: f64) -> f64 {
        let base = u.abs().max(1.0);
        let scale = match self {
            ScalarProfile::Cos { omega, .. } | ScalarProfile::Sin { omega, .. } => base.min(1.0 / omega.abs()),
            ScalarProfile::Exp { rate } => base.min(1.0 / rate.abs()),
            ScalarProfile::CubicSinInverse => base.min(u * u),
            ScalarProfile::Step { at } => base.min((u - at).abs() / 8.0),
            _ => base,
        };
        scale.max(1e-8)
    }

    /// `p`-th derivative at `u`.
    pub fn derivative(&self, u: f64, p: usize) -> Result<f64> {
        if !self.smoothness_on(u, u).allows(p) {
            return Err(Error::SmoothnessExceeded { requested: p, available: self.smoothness_on(u, u) });
        }
        let value = match self {
            ScalarProfile::Constant { value } => {
                if p == 0 {
                    *value
                } else {
                    0.0
                }
            }
            ScalarProfile::Cos { omega, phase } => {
                let x = omega * u + phase;
                let cyc = match p % 4 {
                    0 => x.cos(),
                    1 => -x.sin(),
                    2 => -x.cos(),
                    _ => x.sin(),
                };
                omega.powi(p as i32) * cyc
            }
            ScalarProfile::Sin { omega, phase } => {
                let x = omega * u + phase;
                let cyc = match p % 4 {
                    0 => x.sin(),
                    1 => x.cos(),
                    2 => -x.sin(),
                    _ => -x.cos(),
                };
                omega.powi(p as i32) * cyc
            }
            ScalarProfile::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (i, &c) in coeffs.iter().enumerate().skip(p).rev() {
                    let falling: f64 = ((i - p + 1)..=i).map(|x| x as f64).product();
                    acc = acc * u + c * falling;
                }
                acc
            }
            ScalarProfile::Exp { rate } => rate.powi(p as i32) * (rate * u).exp(),
            ScalarProfile::CubicSinInverse => cubic_sin_inverse_derivative(u, p),
            ScalarProfile::Step { at } => match p {
                0 if u < *at => 1.0,
                0 => -1.0,
                _ => 0.0,
            },
        };
        Ok(value)
    }

    /// Exact `∫_a^b`, when the catalog knows it.
    pub fn integral(&self, a: f64, b: f64) -> Option<f64> {
        match self {
            ScalarProfile::Constant { value } => Some(value * (b - a)),
            ScalarProfile::Cos { omega, phase } => Some(((omega * b + phase).sin() - (omega * a + phase).sin()) / omega),
            ScalarProfile::Sin { omega, phase } => Some(((omega * a + phase).cos() - (omega * b + phase).cos()) / omega),
            ScalarProfile::Polynomial { coeffs } => {
                let anti = |x: f64| coeffs.iter().enumerate().rev().fold(0.0, |acc, (i, &c)| acc * x + c / (i + 1) as f64) * x;
                Some(anti(b) - anti(a))
            }
            ScalarProfile::Exp { rate } => Some(((rate * b).exp() - (rate * a).exp()) / rate),
            ScalarProfile::Step { at } => {
                let left = (b.min(*at) - a.min(*at)).max(0.0);
                let right = (b.max(*at) - a.max(*at)).max(0.0);
                Some(left - right)
            }
            ScalarProfile::CubicSinInverse => None,
        }
    }
}

/// `d^p/du^p [u^3 sin(1/u)]` for `u != 0` by Leibniz on `u^3 · sin(1/u)`;
/// the values at `u = 0` are the limits for `p <= 1`.
fn cubic_sin_inverse_derivative(u: f64, p: usize) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let w = 1.0 / u;
    if !w.is_finite() {
        // Subnormal u: the value and first derivative are at their limits.
        return if p <= 1 { 0.0 } else { f64::NAN };
    }
    let (s, c) = w.sin_cos();
    // d^n/du^n sin(1/u) = A_n(w) sin w + B_n(w) cos w, with d/du = -w^2 d/dw.
    let mut a = vec![1.0];
    let mut b = vec![0.0];
    let mut sin_derivs = Vec::with_capacity(p + 1);
    for n in 0..=p {
        sin_derivs.push(poly_eval(&a, w) * s + poly_eval(&b, w) * c);
        if n == p {
            break;
        }
        // A' = -w^2 A'(w) + w^2 B ; B' = -w^2 A - w^2 B'(w)
        let da = poly_derivative(&a);
        let db = poly_derivative(&b);
        let na = poly_add(&poly_shift2(&poly_neg(&da)), &poly_shift2(&b));
        let nb = poly_add(&poly_shift2(&poly_neg(&a)), &poly_shift2(&poly_neg(&db)));
        a = na;
        b = nb;
    }
    let cube = [u * u * u, 3.0 * u * u, 6.0 * u, 6.0];
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=p.min(3) {
        total += binom * cube[i] * sin_derivs[p - i];
        binom = binom * (p - i) as f64 / (i + 1) as f64;
    }
    total
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(i, &k)| k * i as f64).collect()
}

fn poly_shift2(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0, 0.0];
    out.extend_from_slice(c);
    out
}

fn poly_neg(c: &[f64]) -> Vec<f64> {
    c.iter().map(|x| -x).collect()
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect()
}

/// One `f(u) · M` piece of a term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileComponent {
    #[serde(flatten)]
    pub profile: ScalarProfile,
    pub matrix: ComplexMatrix,
}

type ValueFn = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;
type DerivativeFn = Arc<dyn Fn(f64, usize) -> ComplexMatrix + Send + Sync>;

#[derive(Clone)]
enum TermBody {
    Profiles(Vec<ProfileComponent>),
    Values { f: ValueFn, smoothness: Smoothness, singular_points: Vec<f64>, length_scale: f64 },
    Derivatives { f: DerivativeFn, smoothness: Smoothness, singular_points: Vec<f64> },
}

/// A single `H_j(u)` with derivative access.
#[derive(Clone)]
pub struct OperatorTerm {
    dim: usize,
    body: TermBody,
    mode: DerivativeMode,
}

impl fmt::Debug for OperatorTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.body {
            TermBody::Profiles(c) => format!("{} profile component(s)", c.len()),
            TermBody::Values { .. } => "value closure".to_string(),
            TermBody::Derivatives { .. } => "derivative closure".to_string(),
        };
        f.debug_struct("OperatorTerm").field("dim", &self.dim).field("body", &kind).field("mode", &self.mode).finish()
    }
}

impl OperatorTerm {
    pub fn from_profile(profile: ScalarProfile, matrix: ComplexMatrix) -> Self {
        Self::from_components(vec![ProfileComponent { profile, matrix }]).expect("single component")
    }

    pub fn from_components(components: Vec<ProfileComponent>) -> Result<Self> {
        let dim = components.first().ok_or(Error::EmptyTermSet)?.matrix.dim();
        if let Some(bad) = components.iter().find(|c| c.matrix.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.matrix.dim()));
        }
        Ok(Self { dim, body: TermBody::Profiles(components), mode: DerivativeMode::Analytic })
    }

    /// A term known only through its values; derivatives come from finite
    /// differences over steps proportional to `length_scale`.
    pub fn from_values<F>(dim: usize, f: F, smoothness: Smoothness, singular_points: Vec<f64>, length_scale: f64) -> Self
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        Self {
            dim,
            body: TermBody::Values { f: Arc::new(f), smoothness, singular_points, length_scale },
            mode: DerivativeMode::FiniteDifference,
        }
    }

    /// A term whose closure returns `H^{(p)}(u)` directly.
    pub fn from_derivatives<F>(dim: usize, f: F, smoothness: Smoothness, singular_points: Vec<f64>) -> Self
    where
        F: Fn(f64, usize) -> ComplexMatrix + Send + Sync + 'static,
    {
        Self {
            dim,
            body: TermBody::Derivatives { f: Arc::new(f), smoothness, singular_points },
            mode: DerivativeMode::Analytic,
        }
    }

    /// Switches a profile term to finite-difference derivatives. Closure
    /// terms keep their mode.
    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        if matches!(self.body, TermBody::Profiles(_)) {
            self.mode = mode;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn components(&self) -> Option<&[ProfileComponent]> {
        match &self.body {
            TermBody::Profiles(c) => Some(c),
            _ => None,
        }
    }

    /// Largest trustworthy derivative order on `[a, b]`.
    pub fn max_derivative_on(&self, a: f64, b: f64) -> Smoothness {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match &self.body {
            TermBody::Profiles(c) => c.iter().map(|c| c.profile.smoothness_on(lo, hi)).min().unwrap_or(Smoothness::Unbounded),
            TermBody::Values { smoothness, singular_points, .. } | TermBody::Derivatives { smoothness, singular_points, .. } => {
                if singular_points.iter().any(|&s| lo <= s && s <= hi) {
                    *smoothness
                } else {
                    Smoothness::Unbounded
                }
            }
        }
    }

    pub fn singular_points(&self) -> Vec<f64> {
        match &self.body {
            TermBody::Profiles(c) => c.iter().flat_map(|c| c.profile.singular_points()).collect(),
            TermBody::Values { singular_points, .. } | TermBody::Derivatives { singular_points, .. } => singular_points.clone(),
        }
    }

    fn length_scale(&self, u: f64) -> f64 {
        match &self.body {
            TermBody::Profiles(c) => c.iter().map(|c| c.profile.length_scale(u)).fold(f64::INFINITY, f64::min),
            TermBody::Values { length_scale, .. } => *length_scale,
            TermBody::Derivatives { .. } => u.abs().max(1.0),
        }
    }

    fn value(&self, u: f64) -> Result<ComplexMatrix> {
        self.analytic(u, 0)
    }

    fn analytic(&self, u: f64, p: usize) -> Result<ComplexMatrix> {
        let m = match &self.body {
            TermBody::Profiles(components) => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                for c in components {
                    let s = c.profile.derivative(u, p)?;
                    if s != 0.0 {
                        acc.axpy(Complex64::new(s, 0.0), &c.matrix);
                    }
                }
                acc
            }
            TermBody::Values { f, .. } => {
                debug_assert_eq!(p, 0);
                f(u)
            }
            TermBody::Derivatives { f, .. } => f(u, p),
        };
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, m.dim()));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("term evaluation at u = {u}, p = {p}")));
        }
        Ok(m)
    }

    /// `H_j^{(p)}(u)`.
    pub fn evaluate(&self, u: f64, p: usize) -> Result<ComplexMatrix> {
        let available = self.max_derivative_on(u, u);
        if !available.allows(p) {
            return Err(Error::SmoothnessExceeded { requested: p, available });
        }
        if p == 0 || self.mode == DerivativeMode::Analytic {
            return self.analytic(u, p);
        }
        self.finite_difference(u, p)
    }

    fn finite_difference(&self, u: f64, p: usize) -> Result<ComplexMatrix> {
        let half_width = p.div_ceil(2) + 3;
        let h = f64::EPSILON.powf(1.0 / (p + 8) as f64) * self.length_scale(u);
        let offsets: Vec<f64> = (-(half_width as i64)..=half_width as i64).map(|i| i as f64).collect();
        let weights = fornberg_weights(&offsets, p);
        let mut acc = ComplexMatrix::zeros(self.dim);
        for (x, w) in offsets.iter().zip(&weights) {
            if *w != 0.0 {
                acc.axpy(Complex64::new(*w, 0.0), &self.value(u + x * h)?);
            }
        }
        Ok(acc.scale(1.0 / h.powi(p as i32)))
    }
}

/// Weights of the `order`-th derivative at 0 on the given stencil (unit
/// spacing implied by the offsets).
pub(crate) fn fornberg_weights(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i];
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

pub fn evaluate_term(term: &OperatorTerm, u: f64, p: usize) -> Result<ComplexMatrix> {
    term.evaluate(u, p)
}

/// The split `H = Σ_j H_j`.
#[derive(Clone, Debug)]
pub struct TermSet {
    terms: Vec<OperatorTerm>,
    dim: usize,
}

impl TermSet {
    pub fn new(terms: Vec<OperatorTerm>) -> Result<Self> {
        let dim = terms.first().ok_or(Error::EmptyTermSet)?.dim();
        if let Some(bad) = terms.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.dim()));
        }
        Ok(Self { terms, dim })
    }

    pub fn single(term: OperatorTerm) -> Self {
        Self::new(vec![term]).expect("one term")
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    /// Zero-based access.
    pub fn term(&self, j: usize) -> &OperatorTerm {
        &self.terms[j]
    }

    pub fn max_derivative_on(&self, a: f64, b: f64) -> Smoothness {
        self.terms.iter().map(|t| t.max_derivative_on(a, b)).min().unwrap_or(Smoothness::Unbounded)
    }

    /// Sorted, deduplicated singular points of all terms.
    pub fn singular_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.terms.iter().flat_map(|t| t.singular_points()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `H^{(p)}(u) = Σ_j H_j^{(p)}(u)`, summed in term order.
    pub fn derivative_sum(&self, u: f64, p: usize) -> Result<ComplexMatrix> {
        let mut acc = self.terms[0].evaluate(u, p)?;
        for t in &self.terms[1..] {
            acc += &t.evaluate(u, p)?;
        }
        Ok(acc)
    }

    pub fn sum_at(&self, u: f64) -> Result<ComplexMatrix> {
        self.derivative_sum(u, 0)
    }

    pub fn with_mode(self, mode: DerivativeMode) -> Self {
        Self { terms: self.terms.into_iter().map(|t| t.with_mode(mode)).collect(), dim: self.dim }
    }

    /// Largest Hermitian-part eigenvalue of `H(u)` over a uniform grid; a
    /// non-positive result means every `U(x, y)` on the interval is a
    /// contraction.
    pub fn max_dissipativity(&self, a: f64, b: f64, grid_points: usize) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for u in uniform_grid(a, b, grid_points) {
            worst = worst.max(crate::matrix::hermitian_part_max_eigenvalue(&self.sum_at(u)?));
        }
        Ok(worst)
    }
}

/// `Σ_j |H_j^{(p)}(u)|`.
pub fn sum_derivative_norms(ts: &TermSet, u: f64, p: usize) -> Result<f64> {
    ts.terms().iter().map(|t| t.evaluate(u, p).map(|m| spectral_norm(&m))).sum()
}

pub(crate) fn uniform_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![a];
    }
    let step = (b - a) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { b } else { a + step * i as f64 }).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct LambdaOptions {
    pub grid_points: usize,
    pub safety_factor: f64,
    /// Golden-section refinement iterations around the best grid sample.
    pub refine_iterations: usize,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        Self { grid_points: 257, safety_factor: 1.05, refine_iterations: 40 }
    }
}

/// Result of a Λ estimate. The sup over the continuum is approximated by a
/// grid search plus local refinement, then inflated by `safety_factor`; it
/// is a heuristic, not a certified bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessEstimate {
    pub p_max: usize,
    pub lambda: f64,
    /// Sampled sup before the safety factor.
    pub raw_lambda: f64,
    /// Derivative order that attains the sup.
    pub dominant_order: usize,
    pub grid_points: usize,
    pub safety_factor: f64,
    pub interval: (f64, f64),
}

/// Grid estimate of the smallest Λ with
/// `(Σ_j |H_j^{(p)}(u)|)^{1/(p+1)} <= Λ` for all `p <= p_max` on `[mu, mu + dt]`.
pub fn estimate_lambda(ts: &TermSet, mu: f64, dt: f64, p_max: usize, opts: LambdaOptions) -> Result<SmoothnessEstimate> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("interval width must be positive, got {dt}")));
    }
    if opts.safety_factor < 1.0 {
        return Err(Error::InvalidArgument("safety factor must be >= 1".into()));
    }
    let (a, b) = (mu, mu + dt);
    let available = ts.max_derivative_on(a, b);
    if !available.allows(p_max) {
        return Err(Error::SmoothnessExceeded { requested: p_max, available });
    }
    let grid = uniform_grid(a, b, opts.grid_points.max(2));
    let mut best = (0.0f64, 0usize);
    for p in 0..=p_max {
        let exponent = 1.0 / (p + 1) as f64;
        let objective = |u: f64| sum_derivative_norms(ts, u, p);
        let values = grid.iter().map(|&u| objective(u)).collect::<Result<Vec<_>>>()?;
        let (imax, &vmax) = values.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).expect("nonempty grid");
        let lo = grid[imax.saturating_sub(1)];
        let hi = grid[(imax + 1).min(grid.len() - 1)];
        let refined = golden_section_max(&objective, lo, hi, opts.refine_iterations)?;
        let sup = vmax.max(refined).powf(exponent);
        if sup > best.0 {
            best = (sup, p);
        }
    }
    Ok(SmoothnessEstimate {
        p_max,
        lambda: best.0 * opts.safety_factor,
        raw_lambda: best.0,
        dominant_order: best.1,
        grid_points: grid.len(),
        safety_factor: opts.safety_factor,
        interval: (a, b),
    })
}

fn golden_section_max<F: Fn(f64) -> Result<f64>>(f: &F, mut lo: f64, mut hi: f64, iterations: usize) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = f1.max(f2);
    for _ in 0..iterations {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn scalar_term(profile: ScalarProfile) -> OperatorTerm {
        OperatorTerm::from_profile(profile, ComplexMatrix::identity(2))
    }

    #[test]
    fn cos_term_values() {
        let t = scalar_term(ScalarProfile::cos());
        assert_eq!(t.evaluate(0.0, 0).unwrap(), ComplexMatrix::identity(2));
        assert_eq!(t.evaluate(0.0, 1).unwrap(), ComplexMatrix::zeros(2));
    }

    #[test]
    fn cubic_sin_inverse_at_origin() {
        let t = scalar_term(ScalarProfile::CubicSinInverse);
        assert_eq!(t.evaluate(0.0, 0).unwrap(), ComplexMatrix::zeros(2));
        assert_eq!(t.evaluate(0.0, 1).unwrap(), ComplexMatrix::zeros(2));
        assert!(matches!(
            t.evaluate(0.0, 2),
            Err(Error::SmoothnessExceeded { requested: 2, available: Smoothness::Finite(1) })
        ));
        assert_eq!(t.max_derivative_on(-0.1, 0.3), Smoothness::Finite(1));
        assert_eq!(t.max_derivative_on(0.1, 0.3), Smoothness::Unbounded);
    }

    #[test]
    fn cubic_sin_inverse_closed_form_derivatives() {
        let p = ScalarProfile::CubicSinInverse;
        for &u in &[0.3, -0.7, 1.9] {
            let (s, c) = (1.0f64 / u).sin_cos();
            let d1 = 3.0 * u * u * s - u * c;
            let d2 = 6.0 * u * s - 4.0 * c - s / u;
            assert_relative_eq!(p.derivative(u, 1).unwrap(), d1, max_relative = 1e-13);
            assert_relative_eq!(p.derivative(u, 2).unwrap(), d2, max_relative = 1e-13);
        }
    }

    #[test]
    fn polynomial_derivatives() {
        let p = ScalarProfile::Polynomial { coeffs: vec![1.0, 2.0, 3.0, 4.0] };
        // 1 + 2u + 3u^2 + 4u^3 at u = 2
        assert_relative_eq!(p.derivative(2.0, 0).unwrap(), 49.0);
        assert_relative_eq!(p.derivative(2.0, 1).unwrap(), 2.0 + 12.0 + 48.0);
        assert_relative_eq!(p.derivative(2.0, 2).unwrap(), 6.0 + 48.0);
        assert_relative_eq!(p.derivative(2.0, 3).unwrap(), 24.0);
        assert_eq!(p.derivative(2.0, 4).unwrap(), 0.0);
        assert_relative_eq!(p.integral(0.0, 2.0).unwrap(), 2.0 + 4.0 + 8.0 + 16.0);
    }

    #[test]
    fn profile_integrals_match_quadrature() {
        let profiles = [
            ScalarProfile::constant(2.5),
            ScalarProfile::Cos { omega: 1.7, phase: 0.3 },
            ScalarProfile::Sin { omega: -0.4, phase: 1.0 },
            ScalarProfile::Exp { rate: 0.8 },
            ScalarProfile::Step { at: 0.4 },
        ];
        for p in &profiles {
            let n = 200_000;
            let (a, b) = (-0.3, 1.1);
            let h = (b - a) / n as f64;
            let mid: f64 = (0..n).map(|i| p.derivative(a + (i as f64 + 0.5) * h, 0).unwrap()).sum::<f64>() * h;
            assert!((p.integral(a, b).unwrap() - mid).abs() < 1e-5, "{p:?}");
        }
    }

    #[test]
    fn step_profile() {
        let p = ScalarProfile::Step { at: 0.5 };
        assert_eq!(p.derivative(0.2, 0).unwrap(), 1.0);
        assert_eq!(p.derivative(0.5, 0).unwrap(), -1.0);
        assert_eq!(p.smoothness_on(0.0, 1.0), Smoothness::Finite(0));
        assert_eq!(p.smoothness_on(0.0, 0.4), Smoothness::Unbounded);
        assert!(p.derivative(0.5, 1).is_ok());
    }

    #[test]
    fn sum_derivative_norm_examples() {
        let constant = TermSet::single(scalar_term(ScalarProfile::constant(1.0)));
        assert_relative_eq!(sum_derivative_norms(&constant, 0.7, 0).unwrap(), 1.0);
        assert_eq!(sum_derivative_norms(&constant, 0.7, 1).unwrap(), 0.0);
        let sin2 = TermSet::single(scalar_term(ScalarProfile::sin(2.0)));
        assert!(sum_derivative_norms(&sin2, PI / 4.0, 1).unwrap() < 1e-15);
    }

    #[test]
    fn lambda_for_sin_2u() {
        let ts = TermSet::single(scalar_term(ScalarProfile::sin(2.0)));
        let opts = LambdaOptions { safety_factor: 1.0, ..Default::default() };
        let est = estimate_lambda(&ts, 0.0, PI, 2, opts).unwrap();
        assert_relative_eq!(est.lambda, 2f64.powf(2.0 / 3.0), max_relative = 1e-12);
        assert_eq!(est.dominant_order, 2);
        let large = estimate_lambda(&ts, 0.0, PI, 40, opts).unwrap();
        assert!(large.lambda <= 2.0);
        assert!(large.lambda > est.lambda);
    }

    #[test]
    fn lambda_for_constant_identity() {
        let ts = TermSet::single(scalar_term(ScalarProfile::constant(1.0)));
        let opts = LambdaOptions { safety_factor: 1.0, ..Default::default() };
        for p in [0, 1, 5] {
            assert_relative_eq!(estimate_lambda(&ts, 0.0, 1.0, p, opts).unwrap().lambda, 1.0);
        }
    }

    #[test]
    fn lambda_rejects_beyond_smoothness() {
        let ts = TermSet::single(scalar_term(ScalarProfile::CubicSinInverse));
        assert!(estimate_lambda(&ts, 0.0, 0.5, 1, LambdaOptions::default()).is_ok());
        assert!(matches!(
            estimate_lambda(&ts, 0.0, 0.5, 2, LambdaOptions::default()),
            Err(Error::SmoothnessExceeded { .. })
        ));
        assert!(estimate_lambda(&ts, 0.1, 0.5, 4, LambdaOptions::default()).is_ok());
    }

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 2);
        assert_relative_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], -2.0);
        assert_relative_eq!(w[2], 1.0);
        let w = fornberg_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        assert_relative_eq!(w[0], 1.0 / 12.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], -2.0 / 3.0, max_relative = 1e-14);
        assert!(w[2].abs() < 1e-15);
    }

    #[test]
    fn finite_differences_agree_with_analytic() {
        let profiles = [
            ScalarProfile::cos(),
            ScalarProfile::Sin { omega: 2.0, phase: 0.4 },
            ScalarProfile::Exp { rate: -0.7 },
            ScalarProfile::Polynomial { coeffs: vec![0.5, -1.0, 0.25, 0.125] },
            ScalarProfile::CubicSinInverse,
        ];
        let m = ComplexMatrix::pauli_x().scale(0.8);
        for prof in profiles {
            let analytic = OperatorTerm::from_profile(prof.clone(), m.clone());
            let fd = analytic.clone().with_mode(DerivativeMode::FiniteDifference);
            for &u in &[-1.3, -0.4, 0.1, 0.25, 0.9, 2.2] {
                for p in 1..=2 {
                    let a = analytic.evaluate(u, p).unwrap();
                    let f = fd.evaluate(u, p).unwrap();
                    let scale = spectral_norm(&a).max(1e-3);
                    assert!(
                        crate::matrix::distance(&a, &f) <= 1e-6 * scale,
                        "{prof:?} u={u} p={p}: {:e}",
                        crate::matrix::distance(&a, &f) / scale
                    );
                }
            }
        }
    }

    #[test]
    fn value_closure_terms_use_finite_differences() {
        let t = OperatorTerm::from_values(
            2,
            |u| ComplexMatrix::identity(2).scale(u.sin()),
            Smoothness::Unbounded,
            vec![],
            1.0,
        );
        assert_eq!(t.mode(), DerivativeMode::FiniteDifference);
        let d = t.evaluate(0.3, 1).unwrap();
        assert_relative_eq!(d.get(0, 0).re, 0.3f64.cos(), max_relative = 1e-9);
    }

    #[test]
    fn term_set_validation_and_sum() {
        assert!(matches!(TermSet::new(vec![]), Err(Error::EmptyTermSet)));
        let a = OperatorTerm::from_profile(ScalarProfile::cos(), ComplexMatrix::identity(2));
        let b = OperatorTerm::from_profile(ScalarProfile::cos(), ComplexMatrix::identity(3));
        assert!(matches!(TermSet::new(vec![a.clone(), b]), Err(Error::DimensionMismatch(2, 3))));
        let c = OperatorTerm::from_profile(ScalarProfile::sin(1.0), ComplexMatrix::pauli_x());
        let ts = TermSet::new(vec![a.clone(), c.clone()]).unwrap();
        let u = 0.37;
        let manual = &a.evaluate(u, 0).unwrap() + &c.evaluate(u, 0).unwrap();
        assert_eq!(ts.sum_at(u).unwrap(), manual);
    }

    #[test]
    fn profile_json_shape() {
        let c = ProfileComponent { profile: ScalarProfile::Cos { omega: 2.0, phase: 0.0 }, matrix: ComplexMatrix::identity(1) };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["profile"], "cos");
        assert_eq!(v["omega"], 2.0);
        let back: ProfileComponent =
            serde_json::from_str(r#"{"profile":"cubic-sin-inverse","matrix":{"dim":1,"entries":[[1.0,0.0]]}}"#).unwrap();
        assert_eq!(back.profile, ScalarProfile::CubicSinInverse);
    }
}
