use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error(
        "no convergence after {} iterations (residual {:.3e})",
        .0.iterations,
        .0.final_residual
    )]
    NoConvergence(SolveReport),

    #[error("line search step underflow at iteration {iteration} (residual {residual:.3e})")]
    StepFailure { iteration: usize, residual: f64 },

    #[error("singular Jacobian (smallest pivot ratio {pivot_ratio:.3e})")]
    SingularJacobian { pivot_ratio: f64 },

    #[error("discounted solve failed at delta = {delta:e}: {source}")]
    Discount { delta: f64, source: Box<Error> },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
