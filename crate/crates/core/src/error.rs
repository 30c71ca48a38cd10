use thiserror::Error;

use crate::operator::Smoothness;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be at least 1")]
    ZeroDimension,

    #[error("expected {expected} entries for a {dim}x{dim} matrix, got {got}")]
    EntryCount { dim: usize, expected: usize, got: usize },

    #[error("non-finite value encountered{}", context_suffix(.0))]
    NonFinite(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("derivative of order {requested} requested but the term is only {available}-smooth here")]
    SmoothnessExceeded { requested: usize, available: Smoothness },

    #[error("schedule is built for m = {schedule} terms but the term set has m = {terms}")]
    TermCountMismatch { schedule: usize, terms: usize },

    #[error("term set must contain at least one term")]
    EmptyTermSet,

    #[error("order k = {0} is out of range (factor count would overflow)")]
    OrderTooLarge(u32),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("step size underflow at lambda = {lambda} (h = {step:e})")]
    StepUnderflow { lambda: f64, step: f64 },

    #[error("step limit of {0} exceeded")]
    StepLimit(usize),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("epsilon = {0} must lie in (0, 1]")]
    InvalidEpsilon(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("only {kept} of {total} samples lie above the noise floor {floor:e}; at least 3 are needed, raise the dt grid")]
    BelowNoiseFloor { kept: usize, total: usize, floor: f64 },

    #[error("system is not contractive (max Hermitian-part eigenvalue {0:e} > 0); pass --allow-noncontractive with a kappa shift")]
    NonContractive(f64),

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(ctx: &str) -> String {
    if ctx.is_empty() {
        String::new()
    } else {
        format!(" in {ctx}")
    }
}
