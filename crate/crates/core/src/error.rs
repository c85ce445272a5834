use thiserror::Error;

/// Errors produced by the numerical routines, policies and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge within {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("root is not bracketed: {0}")]
    Bracket(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("no Lambert W branch gives a valid threshold: {0}")]
    BranchResolution(String),

    #[error("delay target {target} is infeasible: {reason}")]
    Infeasible { target: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
