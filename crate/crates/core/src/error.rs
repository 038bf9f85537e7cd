use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sector violation: {0}")]
    Sector(String),
    #[error("branch failure: {0}")]
    Branch(String),
    #[error("nonvanishing violation: {0}")]
    Nonvanishing(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("quadrature not converged: {0}")]
    Quadrature(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("contraction threshold violated: {0}")]
    Contraction(String),
    #[error("divergent dyadic sum: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
