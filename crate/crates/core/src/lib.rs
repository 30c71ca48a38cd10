//! Product-formula decomposition of ordered operator exponentials.
//!
//! Given `H(u) = Σ_j H_j(u)`, the ordered exponential `U(μ+Δλ, μ)` solving
//! `∂_λ U = H(λ) U` is approximated by a k-th order Lie-Trotter-Suzuki
//! product of ordinary matrix exponentials `exp(H_j(μ_c) Δλ_c)`.
//!
//! - [`schedule`] builds the symbolic product (term, offset, weight).
//! - [`evaluator`] applies it to a concrete [`operator::TermSet`].
//! - [`oracle`] integrates the ordered exponential to high accuracy.
//! - [`bounds`] holds the a-priori error bounds and the planner.
//! - [`harness`] runs convergence-order and bound-validation studies.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod matrix;
pub mod operator;
pub mod oracle;
pub mod schedule;
pub mod systems;

pub use error::{Error, Result};
pub use matrix::{mat_exp, spectral_norm, ComplexMatrix};
pub use operator::{OperatorTerm, ScalarProfile, Smoothness, TermSet};
pub use schedule::{lts_schedule, ExpFactor, Schedule};
