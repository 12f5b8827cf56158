use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] kcme::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("need at least 2 strikes, got {0}")]
    InvalidCount(usize),

    #[error("no reference implied volatility for T = {maturity}, K = {strike}")]
    MissingReference { maturity: f64, strike: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
