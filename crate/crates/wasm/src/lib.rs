//! Browser bindings: price one put with both methods, trace factorization
//! rank against tolerance, and draw a fitted conditional-mean curve.

use kcme::cme::{apply_cme, fit_lowrank_cme};
use kcme::kernels::{kernel_matrix_source, median_heuristic, KernelSpec, SampleMatrix};
use kcme::lowrank::{pivoted_cholesky_with, TraceTolerance};
use kcme::market::{inverse_normal_cdf, simulate_heston, uniform_open, HestonParams};
use kcme::pricing::{
    european_put_mc, price_american_cme_with, price_american_ls, training_pair, CmeSettings, ContractSpec,
    ResponseState,
};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use wasm_bindgen::prelude::*;

fn js_err(e: kcme::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct PriceComparison {
    pub cme_price: f64,
    pub cme_millis: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    pub ls_price: f64,
    pub ls_millis: f64,
    pub european_price: f64,
    pub european_std_error: f64,
}

/// American put under the default Heston parameters (with rate `r`), priced
/// by the low-rank CME recursion and by Longstaff–Schwartz on the same paths.
#[wasm_bindgen]
pub fn price_put(
    n_paths: usize,
    maturity: f64,
    strike: f64,
    r: f64,
    epsilon: f64,
    seed: u64,
) -> Result<PriceComparison, JsError> {
    run_price(n_paths, maturity, strike, r, epsilon, seed).map_err(js_err)
}

fn run_price(
    n_paths: usize,
    maturity: f64,
    strike: f64,
    r: f64,
    epsilon: f64,
    seed: u64,
) -> kcme::Result<PriceComparison> {
    let params = HestonParams { r, ..HestonParams::default() };
    let paths = simulate_heston(&params, n_paths, maturity, seed)?;
    let contract = ContractSpec::put(strike, maturity)?;
    let settings = CmeSettings::for_paths(&paths, epsilon, ResponseState::LogPrice)?;
    let cme = price_american_cme_with(&paths, &contract, &settings)?;
    let ls = price_american_ls(&paths, &contract, 4)?;
    let eu = european_put_mc(&paths, &contract)?;
    Ok(PriceComparison {
        cme_price: cme.price,
        cme_millis: cme.elapsed_micros / 1e3,
        rank_x: cme.rank_x.unwrap_or(0),
        rank_y: cme.rank_y.unwrap_or(0),
        ls_price: ls.price,
        ls_millis: ls.elapsed_micros / 1e3,
        european_price: eu.price,
        european_std_error: eu.std_error.unwrap_or(f64::NAN),
    })
}

/// For each tolerance: `[epsilon, rank_x, rank_y, residual_y / trace(K_Y)]`,
/// flattened.
#[wasm_bindgen]
pub fn rank_profile(n_paths: usize, maturity: f64, seed: u64, epsilons: Vec<f64>) -> Result<Vec<f64>, JsError> {
    run_rank_profile(n_paths, maturity, seed, &epsilons).map_err(js_err)
}

fn run_rank_profile(n_paths: usize, maturity: f64, seed: u64, epsilons: &[f64]) -> kcme::Result<Vec<f64>> {
    let paths = simulate_heston(&HestonParams::default(), n_paths, maturity, seed)?;
    let (x, y) = training_pair(&paths, ResponseState::LogPrice)?;
    let settings = CmeSettings::for_paths(&paths, 1e-5, ResponseState::LogPrice)?;
    let mut out = Vec::with_capacity(4 * epsilons.len());
    for &eps in epsilons {
        let tol = TraceTolerance::Relative(eps);
        let fx = pivoted_cholesky_with(&kernel_matrix_source(&settings.kernel_x, &x), tol, None)?;
        let fy = pivoted_cholesky_with(&kernel_matrix_source(&settings.kernel_y, &y), tol, None)?;
        out.extend([eps, fx.rank() as f64, fy.rank() as f64, fy.residual_trace() / fy.trace()]);
    }
    Ok(out)
}

/// Fits `E[exp(-Y^2/2) | X = x]` for `Y = a X + sigma Z` from `n` draws and
/// returns `[x..., fitted..., exact...]` on `grid_points` points in `[-2.5, 2.5]`.
#[wasm_bindgen]
pub fn conditional_mean_curve(
    n: usize,
    a: f64,
    sigma: f64,
    epsilon: f64,
    grid_points: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    run_curve(n, a, sigma, epsilon, grid_points, seed).map_err(js_err)
}

fn run_curve(n: usize, a: f64, sigma: f64, epsilon: f64, grid_points: usize, seed: u64) -> kcme::Result<Vec<f64>> {
    if grid_points < 2 {
        return Err(kcme::Error::InvalidInput("need at least 2 grid points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || inverse_normal_cdf(uniform_open(rng.next_u64()));
    let xs: Vec<f64> = (0..n).map(|_| normal()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| a * x + sigma * normal()).collect();
    let kx = KernelSpec::gaussian(median_heuristic(&xs)?)?;
    let ky = KernelSpec::gaussian(median_heuristic(&ys)?)?;
    let (x, y) = (SampleMatrix::from_scalars(&xs)?, SampleMatrix::from_scalars(&ys)?);
    let op = fit_lowrank_cme(&x, &y, &kx, &ky, (n as f64).powf(-0.5), TraceTolerance::Relative(epsilon))?;
    let f: Vec<f64> = ys.iter().map(|y| (-0.5 * y * y).exp()).collect();
    let grid: Vec<f64> = (0..grid_points).map(|i| -2.5 + 5.0 * i as f64 / (grid_points - 1) as f64).collect();
    let fitted = apply_cme(&op, &f, &SampleMatrix::from_scalars(&grid)?)?;
    let s2 = 1.0 + sigma * sigma;
    let exact = grid.iter().map(|x| (-(a * x).powi(2) / (2.0 * s2)).exp() / s2.sqrt());
    Ok(grid.iter().copied().chain(fitted).chain(exact).collect())
}
