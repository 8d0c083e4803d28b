use thiserror::Error;

/// Errors produced by the numerical routines and the distribution builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature did not converge: estimate {estimate:e} with error bound {error_bound:e}")]
    NonConvergence { estimate: f64, error_bound: f64 },

    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid grid `{field}`: {reason}")]
    InvalidGrid { field: String, reason: String },

    #[error("kernel singular: {0}")]
    KernelSingular(String),

    #[error("energy cutoff too low: {tail_mass:e} of the norm lies above E_max")]
    EnergyCutoffTooLow { tail_mass: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
