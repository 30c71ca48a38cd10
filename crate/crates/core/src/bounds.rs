//! Closed-form error bounds and the decomposition planner.
//!
//! Every formula takes `Q_k` from the generated schedule
//! ([`crate::schedule::q_k`]); the analytic bracket of [`qk_bounds`] is only
//! ever checked, never substituted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::spectral_norm;
use crate::operator::{uniform_grid, TermSet};
use crate::schedule::{q_k, Schedule};

/// `(3/2 · 3^{-k}, 2k · 3^{-k})`.
pub fn qk_bounds(k: u32) -> (f64, f64) {
    let p = 3f64.powi(k as i32);
    (1.5 / p, 2.0 * k as f64 / p)
}

fn five_pow(k: u32) -> f64 {
    5f64.powi(k as i32 - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepBound {
    pub bound: f64,
    pub valid: bool,
}

/// `2 (3 · 5^{k-1} Q_k Λ dt)^{2k+1}`, valid when
/// `2√2 · 5^{k-1} Q_k Λ dt <= 1/2`.
pub fn single_step_bound(k: u32, lambda: f64, dt: f64) -> StepBound {
    let x = five_pow(k) * q_k(k) * lambda * dt;
    StepBound { bound: 2.0 * (3.0 * x).powi(2 * k as i32 + 1), valid: 2.0 * 2f64.sqrt() * x <= 0.5 }
}

/// Largest `dt` for which [`single_step_bound`] is valid.
pub fn single_step_threshold(k: u32, lambda: f64) -> f64 {
    0.5 / (2.0 * 2f64.sqrt() * five_pow(k) * q_k(k) * lambda)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegmentCount {
    pub r: usize,
    /// Raw value `r` must exceed.
    pub threshold: f64,
    pub valid: bool,
}

/// Smallest integer `r > 2 (3 Q_k 5^{k-1} Λ dt)^{1+1/2k} / ε^{1/2k}`, valid
/// when `ε <= 3 Q_k 5^{k-1} Λ dt`.
pub fn segment_count(k: u32, lambda: f64, dt: f64, epsilon: f64) -> Result<SegmentCount> {
    check_epsilon(epsilon)?;
    let a = 3.0 * q_k(k) * five_pow(k) * lambda * dt;
    let inv = 1.0 / (2 * k) as f64;
    let threshold = 2.0 * a.powf(1.0 + inv) / epsilon.powf(inv);
    let ceil = threshold.ceil();
    let r = if ceil == threshold { ceil + 1.0 } else { ceil };
    if !(r < usize::MAX as f64) {
        return Err(Error::InvalidArgument(format!("segment count {threshold:e} does not fit in an integer")));
    }
    Ok(SegmentCount { r: (r as usize).max(1), threshold, valid: epsilon <= a })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialBudget {
    pub n: u64,
    pub valid: bool,
}

/// `2m 5^{k-1} ⌈5k Λ dt (5/3)^k (Λ dt / ε)^{1/2k}⌉`, valid when
/// `ε <= 0.9 (5/3)^k Λ dt`.
pub fn exponential_budget(m: usize, k: u32, lambda: f64, dt: f64, epsilon: f64) -> Result<ExponentialBudget> {
    check_epsilon(epsilon)?;
    let ldt = lambda * dt;
    let ratio = (5.0f64 / 3.0).powi(k as i32);
    let inner = (5.0 * k as f64 * ldt * ratio * (ldt / epsilon).powf(1.0 / (2 * k) as f64)).ceil();
    let n = 2.0 * m as f64 * five_pow(k) * inner;
    if !(n < u64::MAX as f64) {
        return Err(Error::InvalidArgument(format!("exponential budget {n:e} does not fit in an integer")));
    }
    Ok(ExponentialBudget { n: n as u64, valid: epsilon <= 0.9 * ratio * ldt })
}

/// `min{P, ⌈√(½ log_{25/3}(Λ dt / ε))⌉}`, at least 1. `p_limit = None`
/// means the terms are smooth to every order.
///
/// `p_limit` is the largest admissible order `k` (terms `2P`-smooth).
pub fn choose_order(lambda: f64, dt: f64, epsilon: f64, p_limit: Option<u32>) -> u32 {
    let x = lambda * dt / epsilon;
    let unclamped = if x > 1.0 {
        let inner = (0.5 * x.ln() / (25.0f64 / 3.0).ln()).sqrt();
        // Absorb log rounding so exact powers of 25/3 land on the integer.
        (inner - 1e-9).ceil().max(1.0) as u32
    } else {
        1
    };
    match p_limit {
        Some(p) => unclamped.min(p).max(1),
        None => unclamped,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XConstants {
    /// `X_0 ..= X_{2k}`.
    pub x: Vec<f64>,
    pub gamma: f64,
    pub grid_points: usize,
    pub safety_factor: f64,
}

/// `X_p = Σ_c |H_{j_c}^{(p)}(μ)| v_c^p |q_c|` for `p < 2k`; `X_{2k}` uses
/// the max of `|H_{j_c}^{(2k)}|` over a 65-point grid, times 1.1.
pub fn x_constants(s: &Schedule, ts: &TermSet, mu: f64, dt: f64) -> Result<XConstants> {
    const GRID: usize = 65;
    const SAFETY: f64 = 1.1;
    if s.m() != ts.m() {
        return Err(Error::TermCountMismatch { schedule: s.m(), terms: ts.m() });
    }
    let top = 2 * s.k() as usize;
    let available = ts.max_derivative_on(mu, mu + dt);
    if !available.allows(top) {
        return Err(Error::SmoothnessExceeded { requested: top, available });
    }
    let mut x = Vec::with_capacity(top + 1);
    for p in 0..top {
        let norms = (0..ts.m()).map(|j| ts.term(j).evaluate(mu, p).map(|h| spectral_norm(&h))).collect::<Result<Vec<_>>>()?;
        x.push(s.factors().iter().map(|f| norms[f.term_index - 1] * f.offset.powi(p as i32) * f.weight.abs()).sum());
    }
    let grid = uniform_grid(mu, mu + dt, GRID);
    let mut maxima = vec![0.0f64; ts.m()];
    for &u in &grid {
        for (j, max) in maxima.iter_mut().enumerate() {
            *max = max.max(spectral_norm(&ts.term(j).evaluate(u, top)?));
        }
    }
    x.push(SAFETY * s.factors().iter().map(|f| maxima[f.term_index - 1] * f.offset.powi(top as i32) * f.weight.abs()).sum::<f64>());
    let gamma = x.iter().enumerate().map(|(p, v)| v.powf(1.0 / (p + 1) as f64)).fold(0.0, f64::max);
    Ok(XConstants { x, gamma, grid_points: GRID, safety_factor: SAFETY })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanConditions {
    /// Single-step validity for the segment width `dt / r`.
    pub step_condition: bool,
    /// `ε <= 3 Q_k 5^{k-1} Λ dt`.
    pub segment_condition: bool,
    /// `ε <= 0.9 (5/3)^k Λ dt`.
    pub epsilon_condition: bool,
    /// `|U(x, y)| <= 1` is assumed, not checked, by the planner.
    pub norm_condition_assumed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionPlan {
    pub m: usize,
    pub k: u32,
    pub r: usize,
    /// `2m 5^{k-1} r` exponentials actually used.
    pub n: u64,
    /// Closed-form ceiling on `n`.
    pub budget: u64,
    pub lambda: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub q_k: f64,
    /// Per-segment bound at width `dt / r`.
    pub single_step_bound: f64,
    pub conditions: PlanConditions,
}

impl DecompositionPlan {
    pub fn all_conditions_hold(&self) -> bool {
        let c = &self.conditions;
        c.step_condition && c.segment_condition && c.epsilon_condition
    }
}

/// Chooses `k` (unless given), then `r` and the exponential count.
pub fn plan(m: usize, lambda: f64, dt: f64, epsilon: f64, p_limit: Option<u32>, k: Option<u32>) -> Result<DecompositionPlan> {
    check_epsilon(epsilon)?;
    if m == 0 {
        return Err(Error::EmptyTermSet);
    }
    if !(lambda > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument("lambda and dt must be positive".into()));
    }
    let k = k.unwrap_or_else(|| choose_order(lambda, dt, epsilon, p_limit));
    crate::schedule::factor_count(m, k)?;
    let seg = segment_count(k, lambda, dt, epsilon)?;
    let budget = exponential_budget(m, k, lambda, dt, epsilon)?;
    let step = single_step_bound(k, lambda, dt / seg.r as f64);
    let n = 2 * m as u64 * 5u64.pow(k - 1) * seg.r as u64;
    Ok(DecompositionPlan {
        m,
        k,
        r: seg.r,
        n,
        budget: budget.n,
        lambda,
        dt,
        epsilon,
        q_k: q_k(k),
        single_step_bound: step.bound,
        conditions: PlanConditions {
            step_condition: step.valid,
            segment_condition: seg.valid,
            epsilon_condition: budget.valid,
            norm_condition_assumed: true,
        },
    })
}
