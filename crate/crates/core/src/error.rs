use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive semidefinite: Schur diagonal {value:e} at index {index}")]
    NonPsdInput { index: usize, value: f64 },

    #[error("invalid tolerance {0}; expected a finite value >= 0")]
    InvalidTolerance(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid maturity {0}; expected T > 0")]
    InvalidMaturity(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("price {price} outside the no-arbitrage band ({lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },

    #[error("path file: {0}")]
    PathFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
