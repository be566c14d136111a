use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("beta must lie in the open interval (0,1), got {0}")]
    InvalidOrder(f64),

    /// An argument is outside the domain of the operation.
    #[error("{name} = {value} is invalid: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("length mismatch: {what} ({left} vs {right})")]
    Misaligned {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid operator: {0}")]
    Operator(String),

    #[error("point dimension {got} does not match the domain dimension {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("point {0:?} is not strictly inside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("{0}")]
    Uncertified(String),

    #[error("time grid is not uniform (step {first} vs {offending})")]
    NonUniformGrid { first: f64, offending: f64 },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain { name, value, reason }
    }
}
