//! Kernel conditional-mean-embedding engine for American option pricing.
//!
//! The conditional expectation operator `f -> E[f(Y) | X = x]` is learned once
//! from simulated transition pairs, compressed with an adaptive pivoted
//! Cholesky factorization, and then reused at every exercise date of the
//! backward dynamic-programming recursion.
//!
//! Module map:
//!
//! * [`lowrank`] pivoted Cholesky with biorthogonal basis and spectral rotation
//! * [`kernels`] kernel families, lazy Gram sources, median heuristic
//! * [`cme`] full-rank and low-rank conditional mean embeddings, error bounds
//! * [`market`] Heston path simulation and the experiment seeding scheme
//! * [`pricing`] American put pricing (low-rank CME, Longstaff-Schwartz) and
//!   the Black-Scholes / binomial utilities used as oracles

pub mod cme;
pub mod error;
pub mod kernels;
pub mod lowrank;
pub mod market;
pub mod pricing;

pub use error::{Error, Result};
