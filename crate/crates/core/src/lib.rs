//! Projected iterative methods `y⁺ = P_Ξ[y − αs]`, pseudogradient certificates
//! for their search directions, step-size budgets, and sampled Lyapunov checks
//! of practical stability.
//!
//! Every sampled computation takes an explicit seed and an [`Execution`] mode;
//! results are identical in both modes.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod lemmas;
pub mod oracles;
pub mod par;
pub mod problems;

pub use error::{Error, Result};
pub use par::Execution;

/// Dense column vector used for points and directions.
pub type Vector = nalgebra::DVector<f64>;
