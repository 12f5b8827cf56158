//! Reference implied volatilities.
//!
//! At `r = 0` an American put on a martingale is never exercised early, so
//! its value equals the European put, which plain Monte Carlo prices with a
//! known standard error. Other rates need a reference file.

use std::path::Path;

use kcme::market::simulate_terminal_log_prices;
use kcme::pricing::implied_vol_put;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::grid::strike_grid;

/// Reference runs use seeds `REFERENCE_SEED_LANE + lane * 16 + t_index`,
/// far away from the replication seeds.
pub const REFERENCE_SEED_LANE: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    #[serde(rename = "T")]
    pub maturity: f64,
    pub strike: f64,
    pub price: Option<f64>,
    pub std_error: Option<f64>,
    /// Missing when the price could not be inverted.
    pub implied_vol: Option<f64>,
    /// Price standard error divided by vega.
    pub iv_std_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceTable {
    pub entries: Vec<ReferenceEntry>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl ReferenceTable {
    pub fn entry(&self, maturity: f64, strike: f64) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| same(e.maturity, maturity) && same(e.strike, strike))
    }

    pub fn implied_vol(&self, maturity: f64, strike: f64) -> Result<f64> {
        self.entry(maturity, strike)
            .and_then(|e| e.implied_vol)
            .ok_or(BenchError::MissingReference { maturity, strike })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `T,strike,implied_vol` with optional `price`, `std_error` and
    /// `iv_std_error` columns.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let entries = r.deserialize().collect::<std::result::Result<Vec<ReferenceEntry>, _>>()?;
        Ok(ReferenceTable { entries })
    }
}

fn put_vega(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let vol = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    s * (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt() * t.sqrt()
}

/// European MC reference on the config's strike grid with
/// `config.reference_paths` paths per maturity.
pub fn reference_prices_r0(config: &ExperimentConfig) -> Result<ReferenceTable> {
    reference_prices_r0_lane(config, config.reference_paths, 0)
}

pub fn reference_prices_r0_lane(config: &ExperimentConfig, n_paths: usize, lane: u64) -> Result<ReferenceTable> {
    let h = &config.heston;
    if h.r != 0.0 {
        return Err(BenchError::NotApplicable(format!(
            "the Monte Carlo reference needs r = 0 (got {}); supply a reference file",
            h.r
        )));
    }
    let mut entries = Vec::new();
    for (t_index, &maturity) in config.maturities.iter().enumerate() {
        let seed = REFERENCE_SEED_LANE + lane * 16 + t_index as u64;
        let terminal: Vec<f64> =
            simulate_terminal_log_prices(h, n_paths, maturity, seed)?.into_iter().map(f64::exp).collect();
        for strike in strike_grid(h.s0, h.v0, maturity, config.moneyness_count)? {
            let (price, se) = mean_and_stderr(terminal.iter().map(|s| (strike - s).max(0.0)));
            let implied_vol = implied_vol_put(price, h.s0, strike, h.r, maturity).ok();
            let iv_std_error = implied_vol.map(|iv| se / put_vega(h.s0, strike, h.r, iv, maturity));
            entries.push(ReferenceEntry {
                maturity,
                strike,
                price: Some(price),
                std_error: Some(se),
                implied_vol,
                iv_std_error,
            });
        }
    }
    Ok(ReferenceTable { entries })
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
