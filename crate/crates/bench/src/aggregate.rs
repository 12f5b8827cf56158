//! Replication statistics with normal-approximation 95% intervals.

use std::collections::BTreeMap;

use kcme::pricing::PricingMethod;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::grid::ResultRow;
use crate::reference::ReferenceTable;

pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `mean +- 1.96 sd / sqrt(k)` over `k` replication values; a single value
/// gives a zero-width interval.
pub fn normal_interval(values: &[f64]) -> Option<Interval> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let half = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Z_95 * (var / k).sqrt()
    } else {
        0.0
    };
    Some(Interval { mean, lo: mean - half, hi: mean + half })
}

/// f64 keys ordered by bit pattern; all keys here are positive.
type Key = (PricingMethod, usize, u64);

fn key(row: &ResultRow) -> Key {
    (row.method, row.n, row.maturity.to_bits())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub method: PricingMethod,
    pub n: usize,
    pub maturity: f64,
    /// Mean of `|IV - IV_ref| / IV_ref` over every used row; the interval
    /// half-width comes from the per-replication means.
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub rows_used: usize,
    pub rows_excluded: usize,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoneynessCell {
    pub method: PricingMethod,
    pub n: usize,
    pub maturity: f64,
    pub strike: f64,
    pub log_moneyness: f64,
    pub error: Interval,
    pub rows_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IvErrorSummary {
    pub by_cell: Vec<ErrorCell>,
    pub by_moneyness: Vec<MoneynessCell>,
}

/// Rows without an implied volatility, or whose reference could not be
/// inverted, are excluded and counted.
pub fn aggregate_iv_error(rows: &[ResultRow], reference: &ReferenceTable) -> Result<IvErrorSummary> {
    // (key) -> rep -> errors; (key, strike) -> errors
    let mut per_cell: BTreeMap<Key, (BTreeMap<usize, Vec<f64>>, usize)> = BTreeMap::new();
    let mut per_strike: BTreeMap<(Key, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        let entry = reference
            .entry(row.maturity, row.strike)
            .ok_or(BenchError::MissingReference { maturity: row.maturity, strike: row.strike })?;
        let cell = per_cell.entry(key(row)).or_default();
        let (Some(iv), Some(r)) = (row.implied_vol.filter(|_| row.valid), entry.implied_vol) else {
            cell.1 += 1;
            continue;
        };
        let err = (iv - r).abs() / r;
        cell.0.entry(row.rep).or_default().push(err);
        let s = per_strike.entry((key(row), row.strike.to_bits())).or_insert((row.log_moneyness, Vec::new()));
        s.1.push(err);
    }

    let mut summary = IvErrorSummary::default();
    for ((method, n, t), (reps, excluded)) in per_cell {
        let all: Vec<f64> = reps.values().flatten().copied().collect();
        let rep_means: Vec<f64> = reps.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        let (mean, half) = match normal_interval(&rep_means) {
            Some(ci) => (all.iter().sum::<f64>() / all.len() as f64, 0.5 * (ci.hi - ci.lo)),
            None => (f64::NAN, f64::NAN),
        };
        summary.by_cell.push(ErrorCell {
            method,
            n,
            maturity: f64::from_bits(t),
            mean,
            lo: mean - half,
            hi: mean + half,
            rows_used: all.len(),
            rows_excluded: excluded,
            reps: reps.len(),
        });
    }
    for (((method, n, t), strike), (log_moneyness, errs)) in per_strike {
        summary.by_moneyness.push(MoneynessCell {
            method,
            n,
            maturity: f64::from_bits(t),
            strike: f64::from_bits(strike),
            log_moneyness,
            error: normal_interval(&errs).expect("non-empty"),
            rows_used: errs.len(),
        });
    }
    summary.by_moneyness.sort_by(|a, b| {
        (a.method, a.n)
            .cmp(&(b.method, b.n))
            .then(a.maturity.total_cmp(&b.maturity))
            .then(a.strike.total_cmp(&b.strike))
    });
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeCell {
    pub method: PricingMethod,
    pub n: usize,
    pub maturity: f64,
    /// Of `log10(elapsed_micros)`: per-replication means, then their interval.
    pub log10_time: Interval,
    pub reps: usize,
}

pub fn timing_summary(rows: &[ResultRow]) -> Vec<TimeCell> {
    let mut cells: BTreeMap<Key, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        cells.entry(key(row)).or_default().entry(row.rep).or_default().push(row.elapsed_micros.max(1e-3).log10());
    }
    cells
        .into_iter()
        .map(|((method, n, t), reps)| {
            let means: Vec<f64> = reps.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            TimeCell {
                method,
                n,
                maturity: f64::from_bits(t),
                log10_time: normal_interval(&means).expect("non-empty"),
                reps: means.len(),
            }
        })
        .collect()
}
