//! Experiment harness: configuration, the replication grid, reference
//! implied volatilities, aggregation with confidence intervals, rank and
//! convergence studies, and CSV output.

pub mod aggregate;
pub mod config;
pub mod converge;
pub mod error;
pub mod grid;
pub mod output;
pub mod rank;
pub mod reference;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
