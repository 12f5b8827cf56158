//! Synthetic linear-Gaussian study with a closed-form conditional mean.
//!
//! `X ~ N(0, 1)`, `Y = a X + sigma Z` and `f(y) = exp(-y^2 / 2)`, so
//! `E[f(Y) | X = x] = (1 + sigma^2)^(-1/2) exp(-a^2 x^2 / (2 (1 + sigma^2)))`.
//! Both kernels are Gaussian with median-heuristic lengthscales, `lambda =
//! n^-1/2` and a relative trace tolerance.

use std::collections::BTreeMap;

use kcme::cme::{apply_cme, fit_lowrank_cme};
use kcme::kernels::{median_heuristic, KernelSpec, SampleMatrix};
use kcme::lowrank::TraceTolerance;
use kcme::market::{inverse_normal_cdf, uniform_open};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::aggregate::normal_interval;
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeConfig {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub a: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub test_points: usize,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            n_grid: vec![250, 500, 1000, 2000, 4000],
            reps: 10,
            a: 0.8,
            sigma: 0.6,
            epsilon: 1e-5,
            test_points: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRecord {
    pub n: usize,
    pub rep: usize,
    pub l2_error: f64,
    pub rank_x: usize,
    pub rank_y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergeStat {
    #[serde(rename = "N")]
    pub n: usize,
    pub median_l2: f64,
    pub mean_l2: f64,
    pub lo_l2: f64,
    pub hi_l2: f64,
    pub mean_rank_x: f64,
    pub mean_rank_y: f64,
    pub reps: usize,
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| inverse_normal_cdf(uniform_open(rng.next_u64()))).collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn test_function(y: f64) -> f64 {
    (-0.5 * y * y).exp()
}

pub fn true_conditional_mean(x: f64, a: f64, sigma: f64) -> f64 {
    let s2 = 1.0 + sigma * sigma;
    (-a * a * x * x / (2.0 * s2)).exp() / s2.sqrt()
}

/// Root-mean-square prediction error on `test_points` fresh draws of `X`.
/// Replication `rep` uses seed `rep`; training size `n` draws the first `n`
/// entries of its streams, and all sizes share the same test set.
pub fn run_one(config: &ConvergeConfig, n: usize, rep: usize) -> Result<ConvergeRecord> {
    let seed = rep as u64;
    let xs = normals(&mut stream(seed, 0), n);
    let zs = normals(&mut stream(seed, 1), n);
    let ys: Vec<f64> = xs.iter().zip(&zs).map(|(x, z)| config.a * x + config.sigma * z).collect();
    let test = normals(&mut stream(seed, 2), config.test_points);

    let kx = KernelSpec::gaussian(median_heuristic(&xs)?)?;
    let ky = KernelSpec::gaussian(median_heuristic(&ys)?)?;
    let x = SampleMatrix::from_scalars(&xs)?;
    let y = SampleMatrix::from_scalars(&ys)?;
    let op = fit_lowrank_cme(&x, &y, &kx, &ky, (n as f64).powf(-0.5), TraceTolerance::Relative(config.epsilon))?;
    let f: Vec<f64> = ys.iter().map(|&v| test_function(v)).collect();
    let pred = apply_cme(&op, &f, &SampleMatrix::from_scalars(&test)?)?;
    let mse = pred
        .iter()
        .zip(&test)
        .map(|(p, &x)| (p - true_conditional_mean(x, config.a, config.sigma)).powi(2))
        .sum::<f64>()
        / test.len() as f64;
    Ok(ConvergeRecord { n, rep, l2_error: mse.sqrt(), rank_x: op.rank_x(), rank_y: op.rank_y() })
}

pub fn run_converge(config: &ConvergeConfig) -> Result<Vec<ConvergeRecord>> {
    if config.n_grid.is_empty() || config.reps == 0 || config.test_points == 0 {
        return Err(BenchError::EmptyInput("converge needs sizes, replications and test points"));
    }
    let mut out = Vec::new();
    for rep in 0..config.reps {
        for &n in &config.n_grid {
            out.push(run_one(config, n, rep)?);
        }
    }
    Ok(out)
}

pub fn converge_summary(records: &[ConvergeRecord]) -> Vec<ConvergeStat> {
    let mut groups: BTreeMap<usize, Vec<&ConvergeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.n).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(n, g)| {
            let errs: Vec<f64> = g.iter().map(|r| r.l2_error).collect();
            let ci = normal_interval(&errs).expect("non-empty group");
            let k = g.len() as f64;
            ConvergeStat {
                n,
                median_l2: median(&errs),
                mean_l2: ci.mean,
                lo_l2: ci.lo,
                hi_l2: ci.hi,
                mean_rank_x: g.iter().map(|r| r.rank_x as f64).sum::<f64>() / k,
                mean_rank_y: g.iter().map(|r| r.rank_y as f64).sum::<f64>() / k,
                reps: g.len(),
            }
        })
        .collect()
}

/// Midpoint average for an even count.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
