//! Dense complex square matrices.
//!
//! [`ComplexMatrix`] wraps a `nalgebra` dynamic matrix and enforces the
//! square, non-empty, finite-on-construction invariants. The two numerical
//! kernels every other module leans on live here: [`mat_exp`] (scaling and
//! squaring around a diagonal Padé approximant) and [`spectral_norm`]
//! (largest singular value).

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Degree of the diagonal Padé approximant used by [`mat_exp`].
const PADE_DEGREE: usize = 8;

/// Target bound on the norm of the scaled matrix before the Padé step.
const SCALED_NORM_TARGET: f64 = 0.5;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::EntryCount { dim, expected: dim * dim, got: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Self { inner: DMatrix::from_row_slice(dim, dim, &entries) })
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::new(dim, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_nalgebra(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 {
            return Err(Error::ZeroDimension);
        }
        if inner.nrows() != inner.ncols() {
            return Err(Error::DimensionMismatch(inner.nrows(), inner.ncols()));
        }
        let m = Self { inner };
        if !m.is_finite() {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "identity of dimension 0");
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero matrix of dimension 0");
        Self { inner: DMatrix::zeros(dim, dim) }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self::new(dim, entries)
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn pauli_y() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::new(2, vec![z, -I, I, z]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_nalgebra(self) -> DMatrix<Complex64> {
        self.inner
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { inner: &self.inner * Complex64::new(s, 0.0) }
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self { inner: &self.inner * s }
    }

    pub fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &ComplexMatrix) {
        assert_eq!(self.dim(), other.dim(), "axpy dimension mismatch");
        self.inner.zip_apply(&other.inner, |a, b| *a += s * b);
    }

    pub fn checked_mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch(self.dim(), rhs.dim()));
        }
        Ok(self * rhs)
    }

    pub fn checked_add(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch(self.dim(), rhs.dim()));
        }
        Ok(self + rhs)
    }

    pub fn one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|c| self.inner.column(c).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.inner.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.inner[(r, c)] == Complex64::new(0.0, 0.0)))
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        writeln!(f, "ComplexMatrix({n}x{n}) [")?;
        for r in 0..n {
            write!(f, "  ")?;
            for c in 0..n {
                let z = self.inner[(r, c)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner * &rhs.inner }
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: self.inner * rhs.inner }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner + &rhs.inner }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix { inner: &self.inner - &rhs.inner }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { inner: -&self.inner }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.inner += &rhs.inner;
    }
}

/// Wire form: `{"dim": n, "entries": [[re, im], ...]}` in row-major order.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            dim: self.dim(),
            entries: self.entries().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(deserializer)?;
        let entries = raw.entries.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        ComplexMatrix::new(raw.dim, entries).map_err(serde::de::Error::custom)
    }
}

/// Coefficients of the degree-`q` diagonal Padé approximant of `exp`:
/// `c_j = (2q - j)! q! / ((2q)! j! (q - j)!)`.
fn pade_coefficients(q: usize) -> Vec<f64> {
    let mut c = vec![1.0; q + 1];
    for j in 1..=q {
        c[j] = c[j - 1] * (q + 1 - j) as f64 / (j as f64 * (2 * q + 1 - j) as f64);
    }
    c
}

/// Matrix exponential by scaling and squaring.
///
/// The squaring count is the smallest `s` with
/// `max(|A|_1, |A|_inf) / 2^s <= 1/2`; that quantity bounds the 2-norm, so
/// the Padé step always sees a scaled spectral norm of at most one half.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite("mat_exp input".into()));
    }
    let n = a.dim();
    if a.is_diagonal() {
        let diag: Vec<Complex64> = (0..n).map(|i| a.get(i, i).exp()).collect();
        return ComplexMatrix::from_diagonal(&diag);
    }

    let norm_bound = a.one_norm().max(a.inf_norm());
    let squarings = if norm_bound > SCALED_NORM_TARGET {
        (norm_bound / SCALED_NORM_TARGET).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.inner.scale(0.5f64.powi(squarings));

    let coeffs = pade_coefficients(PADE_DEGREE);
    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut even = eye.clone() * Complex64::new(coeffs[0], 0.0);
    let mut odd = DMatrix::<Complex64>::zeros(n, n);
    let mut power = eye;
    for (j, &c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = &power * Complex64::new(c, 0.0);
        if j % 2 == 0 {
            even += term;
        } else {
            odd += term;
        }
    }
    // N(A) = E + O, D(A) = E - O
    let numerator = &even + &odd;
    let denominator = even - odd;
    let mut result = denominator
        .lu()
        .solve(&numerator)
        .ok_or_else(|| Error::NonFinite("singular Padé denominator".into()))?;

    for _ in 0..squarings {
        result = &result * &result;
    }
    ComplexMatrix::from_nalgebra(result)
}

/// Largest singular value.
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    if a.dim() == 1 {
        return a.get(0, 0).norm();
    }
    nalgebra::linalg::SVD::new_unordered(a.inner.clone(), false, false)
        .singular_values
        .max()
}

/// Spectral norm of `a - b`.
pub fn distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    spectral_norm(&(a - b))
}

/// Largest eigenvalue of the Hermitian part `(A + A^†)/2`.
///
/// A non-positive value for every `H(u)` guarantees `|U(x, y)| <= 1` for the
/// generated evolution.
pub fn hermitian_part_max_eigenvalue(a: &ComplexMatrix) -> f64 {
    let herm = (&a.inner + a.inner.adjoint()) * Complex64::new(0.5, 0.0);
    nalgebra::linalg::SymmetricEigen::new(herm).eigenvalues.max()
}

/// Largest real part over the eigenvalues of `a`.
pub fn spectral_abscissa(a: &ComplexMatrix) -> f64 {
    let schur = nalgebra::linalg::Schur::new(a.inner.clone());
    match schur.eigenvalues() {
        Some(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        None => f64::NAN,
    }
}
