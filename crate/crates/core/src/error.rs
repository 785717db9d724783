use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The Friedrichs form integral does not converge near the origin.
    #[error("state is not in the form domain: {0}")]
    NotInFormDomain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A clause of the interaction-potential assumption fails.
    #[error("potential assumption violated ({clause}): {detail}")]
    AssumptionViolation { clause: String, detail: String },

    #[error("potential cannot be evaluated at r = {r}: {detail}")]
    Extrapolation { r: f64, detail: String },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("not converged: {0}")]
    Convergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}
