//! Backward recursion driven by one low-rank conditional expectation operator,
//! fitted offline on the last step and reused at every earlier date.

use serde::{Deserialize, Serialize};

use super::{mean_and_stderr, ContractSpec, PricingMethod, PricingResult};
use crate::cme::{fit_lowrank_cme, CmeOperator};
use crate::error::{Error, Result};
use crate::kernels::{median_heuristic_rows, KernelSpec, SampleMatrix};
use crate::lowrank::TraceTolerance;
use crate::market::PathSet;

/// What the operator conditions on at the next date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseState {
    /// `Y = log S`.
    #[default]
    LogPrice,
    /// `Y = (log S, v)`.
    LogPriceAndVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmeSettings {
    pub kernel_x: KernelSpec,
    pub kernel_y: KernelSpec,
    pub lambda: f64,
    pub epsilon: TraceTolerance,
    pub response: ResponseState,
}

impl CmeSettings {
    /// Default configuration for a path set: `(1 + x.x')^4` on states, Matern
    /// 3/2 with median-heuristic lengthscale on responses, `lambda = n^-1/2`
    /// and a residual trace of `epsilon * trace(K)`.
    pub fn for_paths(paths: &PathSet, epsilon: f64, response: ResponseState) -> Result<Self> {
        let (_, y) = training_pair(paths, response)?;
        Ok(CmeSettings {
            kernel_x: KernelSpec::polynomial(4)?,
            kernel_y: KernelSpec::matern32(median_heuristic_rows(&y)?)?,
            lambda: (paths.n_paths() as f64).powf(-0.5),
            epsilon: TraceTolerance::Relative(epsilon),
            response,
        })
    }
}

fn states_at(paths: &PathSet, k: usize) -> SampleMatrix {
    SampleMatrix::from_columns(&[paths.log_prices_at(k), paths.variances_at(k)]).expect("equal column lengths")
}

/// `(X, Y)` = (states at `n_T - 1`, responses at `n_T`).
pub fn training_pair(paths: &PathSet, response: ResponseState) -> Result<(SampleMatrix, SampleMatrix)> {
    let nt = paths.n_steps();
    let x = states_at(paths, nt - 1);
    let y = match response {
        ResponseState::LogPrice => SampleMatrix::from_scalars(paths.log_prices_at(nt))?,
        ResponseState::LogPriceAndVariance => states_at(paths, nt),
    };
    Ok((x, y))
}

pub fn price_american_cme(
    paths: &PathSet,
    contract: &ContractSpec,
    kernel_x: &KernelSpec,
    kernel_y: &KernelSpec,
    lambda: f64,
    epsilon: TraceTolerance,
) -> Result<PricingResult> {
    let settings =
        CmeSettings { kernel_x: *kernel_x, kernel_y: *kernel_y, lambda, epsilon, response: ResponseState::LogPrice };
    price_american_cme_with(paths, contract, &settings)
}

/// Fits the operator on the last step, then runs the recursion. The reported
/// time covers both phases.
pub fn price_american_cme_with(
    paths: &PathSet,
    contract: &ContractSpec,
    settings: &CmeSettings,
) -> Result<PricingResult> {
    price_american_cme_detailed(paths, contract, settings).map(|(result, _)| result)
}

/// As [`price_american_cme_with`], also handing back the fitted operator.
pub fn price_american_cme_detailed(
    paths: &PathSet,
    contract: &ContractSpec,
    settings: &CmeSettings,
) -> Result<(PricingResult, CmeOperator)> {
    contract.check_paths(paths)?;
    let (x, y) = training_pair(paths, settings.response)?;
    let start = web_time::Instant::now();
    let op = fit_lowrank_cme(&x, &y, &settings.kernel_x, &settings.kernel_y, settings.lambda, settings.epsilon)?;
    let mut result = recursion(paths, contract, &op)?;
    result.elapsed_micros = start.elapsed().as_secs_f64() * 1e6;
    Ok((result, op))
}

/// Online phase only, with an operator fitted elsewhere on `paths.n_paths()`
/// training pairs.
pub fn price_with_operator(paths: &PathSet, contract: &ContractSpec, op: &CmeOperator) -> Result<PricingResult> {
    contract.check_paths(paths)?;
    if op.n() != paths.n_paths() {
        return Err(Error::DimensionMismatch { expected: op.n(), found: paths.n_paths() });
    }
    let start = web_time::Instant::now();
    let mut result = recursion(paths, contract, op)?;
    result.elapsed_micros = start.elapsed().as_secs_f64() * 1e6;
    Ok(result)
}

fn recursion(paths: &PathSet, contract: &ContractSpec, op: &CmeOperator) -> Result<PricingResult> {
    let n = paths.n_paths();
    let nt = paths.n_steps();
    let mut value = vec![0.0; n];
    contract.discounted_payoffs(paths, nt, &mut value);
    let mut payoff = vec![0.0; n];
    let mut cont = vec![0.0; n];
    for k in (1..nt).rev() {
        let w = op.weights(&value)?;
        op.evaluate_weights(&w, &states_at(paths, k), &mut cont)?;
        contract.discounted_payoffs(paths, k, &mut payoff);
        for ((v, &p), &c) in value.iter_mut().zip(&payoff).zip(&cont) {
            *v = p.max(c);
        }
    }
    let (mean, se) = mean_and_stderr(&value);
    Ok(PricingResult {
        price: contract.initial_payoff(paths).max(mean).max(0.0),
        method: PricingMethod::CmeLr,
        elapsed_micros: 0.0,
        rank_x: Some(op.rank_x()),
        rank_y: Some(op.rank_y()),
        n_paths: n,
        seed: Some(paths.seed()),
        std_error: Some(se),
        ridge_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_heston, HestonParams};

    fn two_path_one_step() -> PathSet {
        // S_0 = 98, S_1 = {110, 90}, K = 100, r = 0: payoffs {0, 10}, P_0 = 2.
        let l0 = 98f64.ln();
        PathSet::from_parts(2, 1, 1.0, 0.0, 0, vec![l0, l0, 110f64.ln(), 90f64.ln()], vec![0.04; 4]).unwrap()
    }

    #[test]
    fn one_step_returns_mean_terminal_payoff() {
        let paths = two_path_one_step();
        let c = ContractSpec::put(100.0, 1.0).unwrap();
        let r = price_american_cme(
            &paths,
            &c,
            &KernelSpec::polynomial(4).unwrap(),
            &KernelSpec::matern32(1.0).unwrap(),
            0.5,
            TraceTolerance::Relative(1e-5),
        )
        .unwrap();
        assert!((r.price - 5.0).abs() < 1e-12, "{}", r.price);
        let low = PathSet::from_parts(
            2,
            1,
            1.0,
            0.0,
            0,
            vec![90f64.ln(), 90f64.ln(), 110f64.ln(), 90f64.ln()],
            vec![0.04; 4],
        )
        .unwrap();
        let r = price_american_cme(
            &low,
            &c,
            &KernelSpec::polynomial(4).unwrap(),
            &KernelSpec::matern32(1.0).unwrap(),
            0.5,
            TraceTolerance::Relative(1e-5),
        )
        .unwrap();
        assert!((r.price - 10.0).abs() < 1e-12);
    }

    #[test]
    fn matches_hand_rolled_recursion() {
        let paths = simulate_heston(&HestonParams::default(), 300, 1.0 / 12.0, 7).unwrap();
        let c = ContractSpec::put(102.0, 1.0 / 12.0).unwrap();
        let settings = CmeSettings::for_paths(&paths, 1e-5, ResponseState::LogPrice).unwrap();
        let r = price_american_cme_with(&paths, &c, &settings).unwrap();

        let (x, y) = training_pair(&paths, ResponseState::LogPrice).unwrap();
        let op =
            fit_lowrank_cme(&x, &y, &settings.kernel_x, &settings.kernel_y, settings.lambda, settings.epsilon).unwrap();
        let a = op.coefficient_matrix();
        let nt = paths.n_steps();
        let payoff =
            |k: usize| -> Vec<f64> { paths.log_prices_at(k).iter().map(|x| (102.0 - x.exp()).max(0.0)).collect() };
        let mut v = payoff(nt);
        for k in (1..nt).rev() {
            let pk = payoff(k);
            let mut next = vec![0.0; 300];
            for (q, nv) in next.iter_mut().enumerate() {
                let xq = [paths.log_price(q, k), paths.variance(q, k)];
                let mut c = 0.0;
                for i in 0..300 {
                    for j in 0..300 {
                        if a[(i, j)] != 0.0 {
                            c += v[i] * a[(i, j)] * settings.kernel_x.eval(x.row(j), &xq).unwrap();
                        }
                    }
                }
                *nv = pk[q].max(c);
            }
            v = next;
        }
        let hand = (102.0 - 100.0f64).max(v.iter().sum::<f64>() / 300.0);
        assert!((r.price - hand).abs() <= 1e-9 * hand, "{} vs {hand}", r.price);
        assert_eq!(r.rank_x, Some(op.rank_x()));

        let reused = price_with_operator(&paths, &c, &op).unwrap();
        assert_eq!(reused.price, r.price);
    }

    #[test]
    fn bivariate_response_prices() {
        let paths = simulate_heston(&HestonParams::default(), 400, 0.5, 3).unwrap();
        let c = ContractSpec::put(100.0, 0.5).unwrap();
        let s = CmeSettings::for_paths(&paths, 1e-5, ResponseState::LogPriceAndVariance).unwrap();
        let r = price_american_cme_with(&paths, &c, &s).unwrap();
        assert!(r.price > 0.0 && r.price < 100.0);
    }

    #[test]
    fn rejects_mismatched_operator_and_maturity() {
        let paths = simulate_heston(&HestonParams::default(), 100, 1.0, 1).unwrap();
        let c = ContractSpec::put(100.0, 0.5).unwrap();
        let s = CmeSettings::for_paths(&paths, 1e-5, ResponseState::LogPrice).unwrap();
        assert!(matches!(price_american_cme_with(&paths, &c, &s), Err(Error::InvalidContract(_))));
        let (x, y) = training_pair(&paths, ResponseState::LogPrice).unwrap();
        let op = fit_lowrank_cme(&x, &y, &s.kernel_x, &s.kernel_y, s.lambda, s.epsilon).unwrap();
        let other = simulate_heston(&HestonParams::default(), 50, 1.0, 1).unwrap();
        let c1 = ContractSpec::put(100.0, 1.0).unwrap();
        assert!(price_with_operator(&other, &c1, &op).is_err());
    }
}
