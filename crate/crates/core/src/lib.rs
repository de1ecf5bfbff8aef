//! Gradients of locally Lipschitz functions on sets.
//!
//! For a region `A` (typically a norm ball `B̄ε(x)`) the set gradient
//! `∂f(A)` is represented by a finite [`hull::HullSet`]. Its support function
//! is the directional derivative `f°(A; h)`, its minimal-norm element `ã`
//! ([`minnorm`]) yields the optimal descent direction `h̃ = -j(ã)`
//! ([`norms::dual_map`]), and [`descent::run_descent`] strings these into an
//! ε-shrinking descent method.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activity;
pub mod cli;
pub mod descent;
pub mod error;
pub mod hull;
pub mod minnorm;
pub mod norms;
pub mod oracles;
pub mod region;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use hull::{HullSet, Provenance};
pub use minnorm::MinNormResult;
pub use norms::NormSpec;
pub use oracles::{builtin, FunctionOracle, MaxAffineSpec, PiecewiseAffine};
pub use region::{BallRegion, Region};
