//! Replication grid: one path set per `(rep, n, T)` cell, every strike priced
//! by every configured method on those same paths.

use kcme::market::{experiment_seed, simulate_heston, PathSet};
use kcme::pricing::{
    backward_bound_report, implied_vol_put, price_american_cme_detailed, price_american_ls, CmeSettings, ContractSpec,
    PricingMethod, PricingResult, ResponseState,
};
use kcme::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::reference::ReferenceTable;

/// Standardized moneyness coordinates `m`, evenly spaced on `[-2, 2]`.
pub fn moneyness_grid(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(BenchError::InvalidCount(count));
    }
    Ok((0..count).map(|j| -2.0 + 4.0 * j as f64 / (count - 1) as f64).collect())
}

/// `K = s0 exp(m sqrt(v0 T))` for each grid coordinate `m`, ascending.
pub fn strike_grid(s0: f64, v0: f64, maturity: f64, count: usize) -> Result<Vec<f64>> {
    let scale = (v0 * maturity).sqrt();
    Ok(moneyness_grid(count)?.into_iter().map(|m| s0 * (m * scale).exp()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: PricingMethod,
    pub n: usize,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub strike: f64,
    /// `log(K / s0)`.
    pub log_moneyness: f64,
    pub rep: usize,
    pub price: f64,
    pub implied_vol: Option<f64>,
    pub rel_iv_error: Option<f64>,
    pub elapsed_micros: f64,
    pub rank_x: Option<usize>,
    pub rank_y: Option<usize>,
    pub seed: u64,
    /// False when the price could not be inverted to an implied volatility.
    pub valid: bool,
    pub bound_lr_part: Option<f64>,
    pub ridge_fallback: bool,
}

impl ResultRow {
    /// Sets `rel_iv_error` from the reference table. It stays unset when
    /// either side has no implied volatility.
    pub fn attach_reference(&mut self, reference: &ReferenceTable) -> Result<()> {
        let entry = reference
            .entry(self.maturity, self.strike)
            .ok_or(BenchError::MissingReference { maturity: self.maturity, strike: self.strike })?;
        self.rel_iv_error = match (self.implied_vol, entry.implied_vol) {
            (Some(iv), Some(r)) => Some((iv - r).abs() / r),
            _ => None,
        };
        Ok(())
    }
}

/// Coordinates of one replication cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rep: usize,
    pub n_index: usize,
    pub t_index: usize,
    pub n: usize,
    pub maturity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: Cell,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutcome {
    /// Ordered by `(rep, n, T, strike, method)` whatever the execution order.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
}

impl GridOutcome {
    pub fn invalid_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.valid).count()
    }
}

pub fn cells(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for rep in 0..config.replications {
        for (n_index, &n) in config.n_grid.iter().enumerate() {
            for (t_index, &maturity) in config.maturities.iter().enumerate() {
                let seed = experiment_seed(rep as u64, n_index, t_index)?;
                out.push(Cell { rep, n_index, t_index, n, maturity, seed });
            }
        }
    }
    Ok(out)
}

/// Prices one cell. Simulation and the median heuristic stay outside the
/// timed region.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<Vec<ResultRow>> {
    let paths = simulate_heston(&config.heston, cell.n, cell.maturity, cell.seed)?;
    let strikes = strike_grid(config.heston.s0, config.heston.v0, cell.maturity, config.moneyness_count)?;
    let mut settings = CmeSettings::for_paths(&paths, config.epsilon, ResponseState::LogPrice)?;
    settings.lambda = config.lambda_rule.lambda(cell.n);

    let mut rows = Vec::with_capacity(strikes.len() * config.methods.len());
    let mut bound = None;
    for &strike in &strikes {
        let contract = ContractSpec::put(strike, cell.maturity)?;
        for &method in &config.methods {
            let (result, bound_lr_part) = match method {
                PricingMethod::CmeLr => {
                    let (result, op) = price_american_cme_detailed(&paths, &contract, &settings)?;
                    if bound.is_none() {
                        bound = Some(backward_bound_report(&op, paths.n_steps())?.bound_lr_part);
                    }
                    (result, bound)
                }
                PricingMethod::Ls => (price_american_ls(&paths, &contract, config.ls_degree)?, None),
                other => {
                    return Err(BenchError::InvalidConfig(format!("method {other} cannot be benchmarked")));
                }
            };
            rows.push(make_row(config, cell, &paths, strike, result, bound_lr_part)?);
        }
    }
    Ok(rows)
}

fn make_row(
    config: &ExperimentConfig,
    cell: &Cell,
    paths: &PathSet,
    strike: f64,
    result: PricingResult,
    bound_lr_part: Option<f64>,
) -> Result<ResultRow> {
    let h = &config.heston;
    let implied_vol = match implied_vol_put(result.price, h.s0, strike, h.r, paths.maturity()) {
        Ok(iv) => Some(iv),
        Err(CoreError::PriceOutOfBounds { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(ResultRow {
        method: result.method,
        n: cell.n,
        maturity: cell.maturity,
        strike,
        log_moneyness: (strike / h.s0).ln(),
        rep: cell.rep,
        price: result.price,
        implied_vol,
        rel_iv_error: None,
        elapsed_micros: result.elapsed_micros,
        rank_x: result.rank_x,
        rank_y: result.rank_y,
        seed: cell.seed,
        valid: implied_vol.is_some(),
        bound_lr_part,
        ridge_fallback: result.ridge_fallback,
    })
}

/// Runs every cell on a work pool of `config.threads` workers (0 = all cores).
/// `on_row` sees rows as cells finish; a failing cell is recorded and the
/// remaining cells still run.
pub fn run_grid(config: &ExperimentConfig, on_row: impl Fn(&ResultRow) + Sync) -> Result<GridOutcome> {
    config.validate()?;
    let cells = cells(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| BenchError::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<Vec<ResultRow>, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let rows = run_cell(config, cell).map_err(|e| CellFailure { cell: *cell, message: e.to_string() })?;
                rows.iter().for_each(&on_row);
                Ok(rows)
            })
            .collect()
    });
    let mut outcome = GridOutcome::default();
    for r in results {
        match r {
            Ok(rows) => outcome.rows.extend(rows),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}
