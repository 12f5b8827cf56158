//! Ranks chosen by the pivoted Cholesky factorizations across tolerances.

use std::collections::BTreeMap;

use kcme::kernels::kernel_matrix_source;
use kcme::lowrank::pivoted_cholesky_with;
use kcme::market::simulate_heston;
use kcme::pricing::{training_pair, CmeSettings, PricingMethod, ResponseState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::normal_interval;
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::grid::{cells, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub n: usize,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub epsilon: f64,
    pub rep: usize,
    pub rank_x: usize,
    pub rank_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStat {
    pub n: usize,
    pub maturity: f64,
    pub epsilon: f64,
    pub mean_rank_x: f64,
    pub mean_rank_y: f64,
    pub lo_rank_y: f64,
    pub hi_rank_y: f64,
    pub min_rank_x: usize,
    pub max_rank_x: usize,
    pub reps: usize,
}

/// One record per `(rep, n, T)` from the `cme_lr` rows of a grid run; ranks
/// do not depend on the strike.
pub fn rank_records_from_rows(rows: &[ResultRow], epsilon: f64) -> Vec<RankRecord> {
    let mut seen = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == PricingMethod::CmeLr) {
        if let (Some(rank_x), Some(rank_y)) = (r.rank_x, r.rank_y) {
            seen.entry((r.rep, r.n, r.maturity.to_bits())).or_insert(RankRecord {
                n: r.n,
                maturity: r.maturity,
                epsilon,
                rep: r.rep,
                rank_x,
                rank_y,
            });
        }
    }
    seen.into_values().collect()
}

/// Means over replications for every `(n, T, epsilon)`.
pub fn rank_summary(records: &[RankRecord]) -> Result<Vec<RankStat>> {
    if records.is_empty() {
        return Err(BenchError::EmptyInput("no cme_lr rank records"));
    }
    let mut groups: BTreeMap<(usize, u64, u64), Vec<&RankRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.maturity.to_bits(), r.epsilon.to_bits())).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((n, t, e), g)| {
            let ys: Vec<f64> = g.iter().map(|r| r.rank_y as f64).collect();
            let ci = normal_interval(&ys).expect("non-empty group");
            RankStat {
                n,
                maturity: f64::from_bits(t),
                epsilon: f64::from_bits(e),
                mean_rank_x: g.iter().map(|r| r.rank_x as f64).sum::<f64>() / g.len() as f64,
                mean_rank_y: ci.mean,
                lo_rank_y: ci.lo,
                hi_rank_y: ci.hi,
                min_rank_x: g.iter().map(|r| r.rank_x).min().unwrap_or(0),
                max_rank_x: g.iter().map(|r| r.rank_x).max().unwrap_or(0),
                reps: g.len(),
            }
        })
        .collect())
}

/// Factorizes `K_X` and `K_Y` of the pricing training pair for every cell of
/// `config` and every tolerance. Only the factorizations run; nothing is
/// priced.
pub fn rank_study(config: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<RankRecord>> {
    config.validate()?;
    if epsilons.is_empty() {
        return Err(BenchError::EmptyInput("no tolerances"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| BenchError::InvalidConfig(format!("thread pool: {e}")))?;
    let cells = cells(config)?;
    let per_cell: Vec<Result<Vec<RankRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let paths = simulate_heston(&config.heston, cell.n, cell.maturity, cell.seed)?;
                let (x, y) = training_pair(&paths, ResponseState::LogPrice)?;
                let mut out = Vec::with_capacity(epsilons.len());
                for &eps in epsilons {
                    let s = CmeSettings::for_paths(&paths, eps, ResponseState::LogPrice)?;
                    let fx = pivoted_cholesky_with(&kernel_matrix_source(&s.kernel_x, &x), s.epsilon, None)?;
                    let fy = pivoted_cholesky_with(&kernel_matrix_source(&s.kernel_y, &y), s.epsilon, None)?;
                    out.push(RankRecord {
                        n: cell.n,
                        maturity: cell.maturity,
                        epsilon: eps,
                        rep: cell.rep,
                        rank_x: fx.rank(),
                        rank_y: fy.rank(),
                    });
                }
                Ok(out)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in per_cell {
        records.extend(r?);
    }
    Ok(records)
}
