use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("q must satisfy 0 <= q < 1, got {0}")]
    InvalidQ(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("site prefix exhausted before all colors were placed: {needed} still needed")]
    InsufficientPrefix { needed: usize },

    #[error("window too small: a particle reached the boundary of [{lo}, {hi}]")]
    WindowTooSmall { lo: i64, hi: i64 },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("budget exceeded: {0}")]
    Budget(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
