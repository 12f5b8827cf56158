//! CSV files, one per figure-equivalent dataset. `T{i}` and `N{j}` are
//! 1-based positions in the configured maturity and path-count lists.

use std::path::{Path, PathBuf};

use kcme::pricing::PricingMethod;
use serde::Serialize;

use crate::aggregate::{ErrorCell, Interval, IvErrorSummary, TimeCell};
use crate::config::ExperimentConfig;
use crate::converge::ConvergeStat;
use crate::error::Result;
use crate::grid::ResultRow;
use crate::rank::RankStat;

fn write_all<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_all(path, rows)
}

#[derive(Serialize)]
struct TimeRecord {
    #[serde(rename = "N")]
    n: usize,
    mean_logtime_poly: Option<f64>,
    lo_logtime_poly: Option<f64>,
    hi_logtime_poly: Option<f64>,
    mean_logtime_cme: Option<f64>,
    lo_logtime_cme: Option<f64>,
    hi_logtime_cme: Option<f64>,
}

fn split(i: Option<Interval>) -> (Option<f64>, Option<f64>, Option<f64>) {
    (i.map(|c| c.mean), i.map(|c| c.lo), i.map(|c| c.hi))
}

/// `winner_time_T{i}.csv`.
pub fn write_timing_files(dir: &Path, config: &ExperimentConfig, cells: &[TimeCell]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, &t) in config.maturities.iter().enumerate() {
        let find = |m: PricingMethod, n: usize| {
            cells.iter().find(|c| c.method == m && c.n == n && same(c.maturity, t)).map(|c| c.log10_time)
        };
        let records = config.n_grid.iter().map(|&n| {
            let (mean_logtime_poly, lo_logtime_poly, hi_logtime_poly) = split(find(PricingMethod::Ls, n));
            let (mean_logtime_cme, lo_logtime_cme, hi_logtime_cme) = split(find(PricingMethod::CmeLr, n));
            TimeRecord {
                n,
                mean_logtime_poly,
                lo_logtime_poly,
                hi_logtime_poly,
                mean_logtime_cme,
                lo_logtime_cme,
                hi_logtime_cme,
            }
        });
        let path = dir.join(format!("winner_time_T{}.csv", i + 1));
        write_all(&path, records)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct ErrorRecord {
    #[serde(rename = "N")]
    n: usize,
    mean_relerr_poly: Option<f64>,
    lo_poly: Option<f64>,
    hi_poly: Option<f64>,
    mean_relerr_cme: Option<f64>,
    lo_cme: Option<f64>,
    hi_cme: Option<f64>,
}

#[derive(Serialize)]
struct MoneynessRecord {
    logmoneyness: f64,
    mean_relerr_poly: Option<f64>,
    lo_poly: Option<f64>,
    hi_poly: Option<f64>,
    mean_relerr_cme: Option<f64>,
    lo_cme: Option<f64>,
    hi_cme: Option<f64>,
}

fn cell_interval(c: &ErrorCell) -> Option<Interval> {
    c.mean.is_finite().then_some(Interval { mean: c.mean, lo: c.lo, hi: c.hi })
}

/// `winner_err_T{i}.csv` and `error_mk_winner_T{i}_N{j}.csv`.
pub fn write_error_files(dir: &Path, config: &ExperimentConfig, summary: &IvErrorSummary) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, &t) in config.maturities.iter().enumerate() {
        let find = |m: PricingMethod, n: usize| {
            summary.by_cell.iter().find(|c| c.method == m && c.n == n && same(c.maturity, t)).and_then(cell_interval)
        };
        let records = config.n_grid.iter().map(|&n| {
            let (mean_relerr_poly, lo_poly, hi_poly) = split(find(PricingMethod::Ls, n));
            let (mean_relerr_cme, lo_cme, hi_cme) = split(find(PricingMethod::CmeLr, n));
            ErrorRecord { n, mean_relerr_poly, lo_poly, hi_poly, mean_relerr_cme, lo_cme, hi_cme }
        });
        let path = dir.join(format!("winner_err_T{}.csv", i + 1));
        write_all(&path, records)?;
        written.push(path);

        for (j, &n) in config.n_grid.iter().enumerate() {
            let mut keys: Vec<(f64, f64)> = summary
                .by_moneyness
                .iter()
                .filter(|c| c.n == n && same(c.maturity, t))
                .map(|c| (c.strike, c.log_moneyness))
                .collect();
            keys.sort_by(|a, b| a.0.total_cmp(&b.0));
            keys.dedup_by(|a, b| same(a.0, b.0));
            let find = |m: PricingMethod, k: f64| {
                summary
                    .by_moneyness
                    .iter()
                    .find(|c| c.method == m && c.n == n && same(c.maturity, t) && same(c.strike, k))
                    .map(|c| c.error)
            };
            let records = keys.into_iter().map(|(k, logmoneyness)| {
                let (mean_relerr_poly, lo_poly, hi_poly) = split(find(PricingMethod::Ls, k));
                let (mean_relerr_cme, lo_cme, hi_cme) = split(find(PricingMethod::CmeLr, k));
                MoneynessRecord { logmoneyness, mean_relerr_poly, lo_poly, hi_poly, mean_relerr_cme, lo_cme, hi_cme }
            });
            let path = dir.join(format!("error_mk_winner_T{}_N{}.csv", i + 1, j + 1));
            write_all(&path, records)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct RankRow {
    #[serde(rename = "N")]
    n: usize,
    epsilon: f64,
    mean_rank_x: f64,
    mean_rank_y: f64,
    lo_rank_y: f64,
    hi_rank_y: f64,
    min_rank_x: usize,
    max_rank_x: usize,
    reps: usize,
}

/// `rank_T{i}.csv`, one row per `(N, epsilon)`.
pub fn write_rank_files(dir: &Path, maturities: &[f64], stats: &[RankStat]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, &t) in maturities.iter().enumerate() {
        let mut rows: Vec<&RankStat> = stats.iter().filter(|s| same(s.maturity, t)).collect();
        rows.sort_by(|a, b| a.n.cmp(&b.n).then(b.epsilon.total_cmp(&a.epsilon)));
        let path = dir.join(format!("rank_T{}.csv", i + 1));
        write_all(
            &path,
            rows.into_iter().map(|s| RankRow {
                n: s.n,
                epsilon: s.epsilon,
                mean_rank_x: s.mean_rank_x,
                mean_rank_y: s.mean_rank_y,
                lo_rank_y: s.lo_rank_y,
                hi_rank_y: s.hi_rank_y,
                min_rank_x: s.min_rank_x,
                max_rank_x: s.max_rank_x,
                reps: s.reps,
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_converge(path: &Path, stats: &[ConvergeStat]) -> Result<()> {
    write_all(path, stats)
}
