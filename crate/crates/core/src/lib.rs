//! First-passage-time densities of a standard Brownian motion through a
//! moving boundary `X_t`, the Dirichlet Green function of the heat equation
//! on the region below the boundary, and a set of independent cross-checks
//! (closed forms, probabilistic identities and Monte Carlo simulation).
//!
//! The density `p` of the hitting time solves the weakly singular Volterra
//! equation
//!
//! ```text
//! p(t) = -G_x(X_t, t; r0, 0) + ∫_0^t G_x(X_t, t; X_τ, τ) p(τ) dτ
//! ```
//!
//! whose kernel behaves like `(t - τ)^(γ - 3/2)` for a boundary that is
//! Hölder continuous with exponent `γ ∈ (1/2, 1]`.

// `!(x > 0.0)` style comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod config;
mod error;
pub mod gauss_kernel;
pub mod green;
pub mod mc;
#[cfg(test)]
mod oracle;
pub mod quad;
pub mod solver;
pub mod validator;

pub use boundary::{BoundaryCurve, CurveKind, HolderEstimate};
pub use error::{Error, Result};
pub use green::GreenField;
pub use mc::{McConfig, McRun};
pub use validator::ResidualReport;
pub use solver::{DensityEstimate, Method, SourceSpec, TimeGrid};
