use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown subgroup tag `{0}`")]
    UnknownSubgroup(String),

    #[error("{sub} is not a subgroup of {sup}")]
    NotASubgroup { sub: String, sup: String },

    #[error("grid size {m} is not a multiple of {required}")]
    Divisibility { m: usize, required: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("truncation at L = {l_max} leaves relative tail weight {tail:e}")]
    Truncation { l_max: usize, tail: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("ambiguous syndrome: {0}")]
    AmbiguousSyndrome(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
