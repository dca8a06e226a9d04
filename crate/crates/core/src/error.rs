use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid object (curve, source, grid, config).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "loss of diagonal dominance at node {node} (t = {t}): coefficient {coefficient} < 0.1, refine the grid"
    )]
    DiagonalDominance { node: usize, t: f64, coefficient: f64 },

    #[error("picard iteration did not converge in window {window} after {iterations} iterations (last contraction ratio {ratio})")]
    NonConvergence {
        window: usize,
        iterations: usize,
        ratio: f64,
    },

    #[error("mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures of the numerical solvers, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::DiagonalDominance { .. } | Error::NonConvergence { .. }
        )
    }
}
