//! Built-in term sets, JSON-described custom systems and the κ catalog.
//!
//! Registry keys:
//!
//! | key | system |
//! |-----|--------|
//! | `fig1a` | `u^3 sin(1/u) · I_2` |
//! | `fig1b` | `cos(u) · I_2` |
//! | `pauli-flip[:at]` | `+σ_z` for `u < at`, `-σ_z` after (default `at = 0.5`) |
//! | `random-hermitian[:seed,dim,m]` | Hermitian trigonometric-polynomial terms |
//! | `random-antihermitian[:seed,dim,m]` | `i ×` the Hermitian family; contractive |
//!
//! Anything ending in `.json` is read as a custom system file.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, ComplexMatrix};
use crate::operator::{DerivativeMode, OperatorTerm, ProfileComponent, ScalarProfile, TermSet};

pub const BUILTIN_KEYS: [&str; 5] = ["fig1a", "fig1b", "pauli-flip", "random-hermitian", "random-antihermitian"];

pub fn fig1a() -> TermSet {
    TermSet::single(OperatorTerm::from_profile(ScalarProfile::CubicSinInverse, ComplexMatrix::identity(2)))
}

pub fn fig1b() -> TermSet {
    TermSet::single(OperatorTerm::from_profile(ScalarProfile::cos(), ComplexMatrix::identity(2)))
}

pub fn pauli_flip(at: f64) -> TermSet {
    TermSet::single(OperatorTerm::from_profile(ScalarProfile::Step { at }, ComplexMatrix::pauli_z()))
}

/// `m` terms `A_0 + cos(ω₁u) A_1 + sin(ω₂u) A_2` with random Hermitian
/// `A_i` of spectral norms 0.5, 0.3, 0.2 and frequencies in `[0.5, 1.5]`.
pub fn random_hermitian(seed: u64, dim: usize, m: usize) -> Result<TermSet> {
    random_trig_system(seed, dim, m, Complex64::new(1.0, 0.0))
}

/// The Hermitian family times `i`, so every `U(x, y)` is unitary.
pub fn random_antihermitian(seed: u64, dim: usize, m: usize) -> Result<TermSet> {
    random_trig_system(seed, dim, m, Complex64::new(0.0, 1.0))
}

fn random_trig_system(seed: u64, dim: usize, m: usize, phase: Complex64) -> Result<TermSet> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if m == 0 {
        return Err(Error::EmptyTermSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(m);
    for _ in 0..m {
        let w1 = rng.gen_range(0.5..1.5);
        let w2 = rng.gen_range(0.5..1.5);
        let profiles = [ScalarProfile::constant(1.0), ScalarProfile::Cos { omega: w1, phase: 0.0 }, ScalarProfile::sin(w2)];
        let norms = [0.5, 0.3, 0.2];
        let components = profiles
            .into_iter()
            .zip(norms)
            .map(|(profile, norm)| ProfileComponent { profile, matrix: random_hermitian_matrix(&mut rng, dim, norm).scale_complex(phase) })
            .collect();
        terms.push(OperatorTerm::from_components(components)?);
    }
    TermSet::new(terms)
}

/// Hermitian matrix with the given spectral norm.
pub fn random_hermitian_matrix<R: Rng>(rng: &mut R, dim: usize, norm: f64) -> ComplexMatrix {
    let entries = (0..dim * dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let x = ComplexMatrix::new(dim, entries).expect("finite entries");
    let h = (&x + &x.adjoint()).scale(0.5);
    let n = spectral_norm(&h);
    if n == 0.0 {
        ComplexMatrix::identity(dim).scale(norm)
    } else {
        h.scale(norm / n)
    }
}

/// Resolves a registry key or a `.json` path.
pub fn resolve(key: &str) -> Result<TermSet> {
    if key.ends_with(".json") {
        return load_system_file(key);
    }
    let (name, args) = match key.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (key, None),
    };
    let numbers = |a: Option<&str>| -> Result<Vec<f64>> {
        a.map(|s| {
            s.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number '{x}' in '{key}'"))))
                .collect()
        })
        .unwrap_or_else(|| Ok(Vec::new()))
    };
    match name {
        "fig1a" | "fig1b" if args.is_some() => Err(Error::InvalidArgument(format!("'{name}' takes no parameters"))),
        "fig1a" => Ok(fig1a()),
        "fig1b" => Ok(fig1b()),
        "pauli-flip" => match numbers(args)?.as_slice() {
            [] => Ok(pauli_flip(0.5)),
            [at] => Ok(pauli_flip(*at)),
            _ => Err(Error::InvalidArgument("pauli-flip takes one parameter (flip point)".into())),
        },
        "random-hermitian" | "random-antihermitian" => {
            let v = numbers(args)?;
            if v.len() > 3 || v.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
                return Err(Error::InvalidArgument(format!("'{name}' takes up to three non-negative integers: seed,dim,m")));
            }
            let seed = v.first().copied().unwrap_or(0.0) as u64;
            let dim = v.get(1).copied().unwrap_or(4.0) as usize;
            let m = v.get(2).copied().unwrap_or(2.0) as usize;
            if name == "random-hermitian" {
                random_hermitian(seed, dim, m)
            } else {
                random_antihermitian(seed, dim, m)
            }
        }
        _ => Err(Error::UnknownSystem(key.to_string())),
    }
}

/// Same as [`resolve`] but with a seed override for the random families.
pub fn resolve_seeded(key: &str, seed: Option<u64>) -> Result<TermSet> {
    match (seed, key.split_once(':')) {
        (Some(seed), None) if key.starts_with("random-") => resolve(&format!("{key}:{seed}")),
        (Some(seed), Some((name, rest))) if name.starts_with("random-") => {
            let tail: Vec<&str> = rest.split(',').skip(1).collect();
            let mut joined = format!("{name}:{seed}");
            for t in tail {
                joined.push(',');
                joined.push_str(t);
            }
            resolve(&joined)
        }
        _ => resolve(key),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TermSpec {
    ScalarProfile {
        #[serde(flatten)]
        profile: ScalarProfile,
        matrix: ComplexMatrix,
    },
    Sum {
        components: Vec<ProfileComponent>,
    },
}

/// On-disk description of a custom system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub dim: usize,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub derivative_mode: Option<DerivativeMode>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<TermSet> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for spec in &self.terms {
            let components = match spec {
                TermSpec::ScalarProfile { profile, matrix } => vec![ProfileComponent { profile: profile.clone(), matrix: matrix.clone() }],
                TermSpec::Sum { components } => components.clone(),
            };
            let term = OperatorTerm::from_components(components)?;
            if term.dim() != self.dim {
                return Err(Error::DimensionMismatch(self.dim, term.dim()));
            }
            terms.push(term.with_mode(self.derivative_mode.unwrap_or(DerivativeMode::Analytic)));
        }
        TermSet::new(terms)
    }
}

pub fn load_system_file(path: impl AsRef<Path>) -> Result<TermSet> {
    let text = std::fs::read_to_string(path)?;
    let spec: SystemSpec = serde_json::from_str(&text)?;
    spec.build()
}

/// Parses a κ catalog id: `zero`, `const:c`, `linear:a,b` (`a + b u`), or
/// any [`ScalarProfile`] as inline JSON.
pub fn parse_kappa(id: &str) -> Result<ScalarProfile> {
    let bad = || Error::InvalidArgument(format!("unrecognised kappa '{id}'; expected zero, const:c, linear:a,b or profile JSON"));
    if id.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(id)?);
    }
    let (name, args) = id.split_once(':').unwrap_or((id, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    match (name, nums.as_slice()) {
        ("zero", []) => Ok(ScalarProfile::constant(0.0)),
        ("const", [c]) => Ok(ScalarProfile::constant(*c)),
        ("linear", [a, b]) => Ok(ScalarProfile::Polynomial { coeffs: vec![*a, *b] }),
        _ => Err(bad()),
    }
}
