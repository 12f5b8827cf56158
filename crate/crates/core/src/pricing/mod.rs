//! American put pricing on simulated paths.
//!
//! Payoffs are discounted to time zero, `P_k = exp(-r t_k) (K - S_k)^+`, so
//! both backward recursions compare and average values in the same units.

mod analytic;
mod bound;
mod kernel;
mod lsm;

pub use analytic::{binomial_american_put, binomial_european_put, black_scholes_put, implied_vol_put, normal_cdf};
pub use bound::{backward_bound_report, BackwardBoundReport, STATISTICAL_PART};
pub use kernel::{
    price_american_cme, price_american_cme_detailed, price_american_cme_with, price_with_operator, training_pair,
    CmeSettings, ResponseState,
};
pub use lsm::{price_american_ls, LS_RIDGE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PathSet;

/// A put with strike `K` expiring at `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    strike: f64,
    maturity: f64,
}

impl ContractSpec {
    pub fn put(strike: f64, maturity: f64) -> Result<Self> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::InvalidContract(format!("strike must be positive, got {strike}")));
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::InvalidContract(format!("maturity must be positive, got {maturity}")));
        }
        Ok(ContractSpec { strike, maturity })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// Checks that `paths` end at this contract's maturity.
    pub fn check_paths(&self, paths: &PathSet) -> Result<()> {
        let t = paths.maturity();
        if (t - self.maturity).abs() > 1e-9 * self.maturity.max(1.0) {
            return Err(Error::InvalidContract(format!(
                "paths end at T = {t} but the contract matures at {}",
                self.maturity
            )));
        }
        Ok(())
    }

    /// Discounted payoffs of every path at date `k`, written into `out`.
    pub fn discounted_payoffs(&self, paths: &PathSet, k: usize, out: &mut [f64]) {
        let disc = (-paths.rate() * paths.dt() * k as f64).exp();
        for (o, &x) in out.iter_mut().zip(paths.log_prices_at(k)) {
            *o = disc * (self.strike - x.exp()).max(0.0);
        }
    }

    /// Payoff at time zero, from the first path's initial price.
    pub fn initial_payoff(&self, paths: &PathSet) -> f64 {
        (self.strike - paths.log_price(0, 0).exp()).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingMethod {
    CmeLr,
    Ls,
    EuropeanMc,
    Binomial,
}

impl PricingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PricingMethod::CmeLr => "cme_lr",
            PricingMethod::Ls => "ls",
            PricingMethod::EuropeanMc => "european_mc",
            PricingMethod::Binomial => "binomial",
        }
    }
}

impl std::fmt::Display for PricingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PricingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cme_lr" | "cme" => Ok(PricingMethod::CmeLr),
            "ls" | "poly" => Ok(PricingMethod::Ls),
            "european_mc" => Ok(PricingMethod::EuropeanMc),
            "binomial" => Ok(PricingMethod::Binomial),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    pub method: PricingMethod,
    /// Wall time of the pricing algorithm alone, excluding simulation.
    pub elapsed_micros: f64,
    pub rank_x: Option<usize>,
    pub rank_y: Option<usize>,
    pub n_paths: usize,
    pub seed: Option<u64>,
    /// Sample standard deviation of the per-path values over `sqrt(n)`.
    pub std_error: Option<f64>,
    /// Set when a least-squares regression needed the ridge fallback.
    pub ridge_fallback: bool,
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Plain Monte Carlo European put: mean of the discounted terminal payoffs.
pub fn european_put_mc(paths: &PathSet, contract: &ContractSpec) -> Result<PricingResult> {
    contract.check_paths(paths)?;
    let start = web_time::Instant::now();
    let mut payoff = vec![0.0; paths.n_paths()];
    contract.discounted_payoffs(paths, paths.n_steps(), &mut payoff);
    let (price, se) = mean_and_stderr(&payoff);
    Ok(PricingResult {
        price,
        method: PricingMethod::EuropeanMc,
        elapsed_micros: start.elapsed().as_secs_f64() * 1e6,
        rank_x: None,
        rank_y: None,
        n_paths: paths.n_paths(),
        seed: Some(paths.seed()),
        std_error: Some(se),
        ridge_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_heston, HestonParams};

    #[test]
    fn contract_validation() {
        assert!(ContractSpec::put(0.0, 1.0).is_err());
        assert!(ContractSpec::put(100.0, 0.0).is_err());
        assert!(matches!(ContractSpec::put(f64::NAN, 1.0), Err(Error::InvalidContract(_))));
        let paths = simulate_heston(&HestonParams::default(), 10, 1.0, 0).unwrap();
        assert!(ContractSpec::put(100.0, 0.5).unwrap().check_paths(&paths).is_err());
        assert!(ContractSpec::put(100.0, 1.0).unwrap().check_paths(&paths).is_ok());
    }

    #[test]
    fn zero_rate_payoffs_are_undiscounted() {
        let paths = simulate_heston(&HestonParams::default(), 50, 1.0, 2).unwrap();
        let c = ContractSpec::put(105.0, 1.0).unwrap();
        let mut p = vec![0.0; 50];
        c.discounted_payoffs(&paths, 30, &mut p);
        for (i, v) in p.iter().enumerate() {
            assert_eq!(*v, (105.0 - paths.log_price(i, 30).exp()).max(0.0));
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [PricingMethod::CmeLr, PricingMethod::Ls, PricingMethod::EuropeanMc, PricingMethod::Binomial] {
            assert_eq!(m.as_str().parse::<PricingMethod>().unwrap(), m);
        }
        assert!("cubic".parse::<PricingMethod>().is_err());
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
