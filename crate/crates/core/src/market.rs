//! Heston path simulation with a full-truncation Euler scheme.
//!
//! Randomness: path `i` of a run with seed `s` draws from the ChaCha8 stream
//! `(seed_from_u64(s), stream = i)`. Each step consumes two 64-bit words, the
//! variance shock first, mapped to uniforms on `(0, 1)` by
//! `((w >> 12) + 0.5) / 2^52` and to standard normals by the inverse CDF.
//! Paths therefore do not depend on how many other paths are simulated or in
//! which order.

use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Stored variances never fall below this.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub r: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        HestonParams { s0: 100.0, v0: 0.04, r: 0.0, kappa: 2.0, theta: 0.04, xi: 0.3, rho: -0.7 }
    }
}

impl HestonParams {
    /// Constant-volatility special case: `xi = 0`, `v0 = theta = sigma^2`.
    pub fn black_scholes(s0: f64, sigma: f64, r: f64) -> Self {
        let v = sigma * sigma;
        HestonParams { s0, v0: v, r, kappa: 0.0, theta: v, xi: 0.0, rho: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.s0, self.v0, self.r, self.kappa, self.theta, self.xi, self.rho];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        let checks = [
            (self.s0 > 0.0, "s0 must be positive"),
            (self.v0 >= 0.0, "v0 must be nonnegative"),
            (self.kappa >= 0.0, "kappa must be nonnegative"),
            (self.theta >= 0.0, "theta must be nonnegative"),
            (self.xi >= 0.0, "xi must be nonnegative"),
            ((-1.0..=1.0).contains(&self.rho), "rho must lie in [-1, 1]"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParams(msg.into()));
            }
        }
        Ok(())
    }
}

/// Weekly-ish monitoring: `max(20, floor(52 T))` steps.
pub fn monitoring_steps(maturity: f64) -> Result<usize> {
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(Error::InvalidMaturity(maturity));
    }
    Ok(((52.0 * maturity).floor() as usize).max(20))
}

/// Seed of replication `rep` in grid cell `(n_index, t_index)`.
pub fn experiment_seed(rep: u64, n_index: usize, t_index: usize) -> Result<u64> {
    for index in [n_index, t_index] {
        if index >= 4 {
            return Err(Error::IndexOutOfRange { index, limit: 4 });
        }
    }
    Ok(rep * 16 + n_index as u64 * 4 + t_index as u64)
}

/// Maps a 64-bit word to `((word >> 12) + 0.5) / 2^52`, strictly inside `(0, 1)`.
#[inline]
pub fn uniform_open(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal quantile.
#[inline]
pub fn inverse_normal_cdf(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Simulated log-prices and variances, time-major: entry `(k, i)` is path
/// `i` at monitoring date `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    rate: f64,
    seed: u64,
    log_prices: Vec<f64>,
    variances: Vec<f64>,
}

impl PathSet {
    /// Builds a path set from time-major arrays of `(n_steps + 1) * n_paths`.
    pub fn from_parts(
        n_paths: usize,
        n_steps: usize,
        dt: f64,
        rate: f64,
        seed: u64,
        log_prices: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let len = (n_steps + 1) * n_paths;
        if n_paths == 0 || n_steps == 0 {
            return Err(Error::InvalidInput("path set needs at least one path and one step".into()));
        }
        for v in [&log_prices, &variances] {
            if v.len() != len {
                return Err(Error::DimensionMismatch { expected: len, found: v.len() });
            }
        }
        if !(dt > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidInput("dt must be positive and the rate finite".into()));
        }
        if log_prices.iter().chain(&variances).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite path values".into()));
        }
        Ok(PathSet { n_paths, n_steps, dt, rate, seed, log_prices, variances })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn maturity(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Log-prices of every path at date `k`.
    pub fn log_prices_at(&self, k: usize) -> &[f64] {
        &self.log_prices[k * self.n_paths..(k + 1) * self.n_paths]
    }

    pub fn variances_at(&self, k: usize) -> &[f64] {
        &self.variances[k * self.n_paths..(k + 1) * self.n_paths]
    }

    pub fn log_price(&self, path: usize, k: usize) -> f64 {
        self.log_prices[k * self.n_paths + path]
    }

    pub fn variance(&self, path: usize, k: usize) -> f64 {
        self.variances[k * self.n_paths + path]
    }

    pub fn log_prices(&self) -> &[f64] {
        &self.log_prices
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

pub fn simulate_heston(params: &HestonParams, n_paths: usize, maturity: f64, seed: u64) -> Result<PathSet> {
    let steps = monitoring_steps(maturity)?;
    simulate_heston_steps(params, n_paths, maturity, steps, seed)
}

/// Full-truncation Euler with `n_steps` equal steps over `[0, maturity]`.
///
/// With `v+ = max(v, 0)`:
/// `v' = max(v + kappa (theta - v+) dt + xi sqrt(v+ dt) Z_v, 1e-8)` and
/// `log S' = log S + (r - v+/2) dt + sqrt(v+ dt) Z_S`, where
/// `Z_S = rho Z_v + sqrt(1 - rho^2) Z_perp`.
pub fn simulate_heston_steps(
    params: &HestonParams,
    n_paths: usize,
    maturity: f64,
    n_steps: usize,
    seed: u64,
) -> Result<PathSet> {
    let grid = StepGrid::new(params, n_paths, maturity, n_steps)?;
    let len = (n_steps + 1) * n_paths;
    let mut log_prices = vec![0.0; len];
    let mut variances = vec![0.0; len];
    let base = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_paths {
        let mut path = grid.path(&base, i);
        log_prices[i] = path.x;
        variances[i] = path.v;
        for k in 1..=n_steps {
            path.step();
            log_prices[k * n_paths + i] = path.x;
            variances[k * n_paths + i] = path.v;
        }
    }
    PathSet::from_parts(n_paths, n_steps, grid.dt, params.r, seed, log_prices, variances)
}

/// Terminal log-prices of the paths [`simulate_heston`] would produce, without
/// storing the intermediate dates.
pub fn simulate_terminal_log_prices(
    params: &HestonParams,
    n_paths: usize,
    maturity: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n_steps = monitoring_steps(maturity)?;
    let grid = StepGrid::new(params, n_paths, maturity, n_steps)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_paths)
        .map(|i| {
            let mut path = grid.path(&base, i);
            for _ in 0..n_steps {
                path.step();
            }
            path.x
        })
        .collect())
}

struct StepGrid<'a> {
    params: &'a HestonParams,
    dt: f64,
    sqrt_dt: f64,
    rho_perp: f64,
}

impl<'a> StepGrid<'a> {
    fn new(params: &'a HestonParams, n_paths: usize, maturity: f64, n_steps: usize) -> Result<Self> {
        params.validate()?;
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::InvalidMaturity(maturity));
        }
        if n_paths == 0 || n_steps == 0 {
            return Err(Error::InvalidInput("need at least one path and one step".into()));
        }
        let dt = maturity / n_steps as f64;
        Ok(StepGrid { params, dt, sqrt_dt: dt.sqrt(), rho_perp: (1.0 - params.rho * params.rho).max(0.0).sqrt() })
    }

    fn path(&self, base: &ChaCha8Rng, i: usize) -> PathState<'_, 'a> {
        let mut rng = base.clone();
        rng.set_stream(i as u64);
        PathState { grid: self, rng, x: self.params.s0.ln(), v: self.params.v0.max(VARIANCE_FLOOR) }
    }
}

struct PathState<'g, 'a> {
    grid: &'g StepGrid<'a>,
    rng: ChaCha8Rng,
    x: f64,
    v: f64,
}

impl PathState<'_, '_> {
    fn step(&mut self) {
        let (p, g) = (self.grid.params, self.grid);
        let z_v = inverse_normal_cdf(uniform_open(self.rng.next_u64()));
        let z_perp = inverse_normal_cdf(uniform_open(self.rng.next_u64()));
        let z_s = p.rho * z_v + g.rho_perp * z_perp;
        let vp = self.v.max(0.0);
        let vol = vp.sqrt() * g.sqrt_dt;
        self.x += (p.r - 0.5 * vp) * g.dt + vol * z_s;
        self.v = (self.v + p.kappa * (p.theta - vp) * g.dt + p.xi * vol * z_v).max(VARIANCE_FLOOR);
    }
}

/// Path-file magic, "KPTH".
pub const PATH_FILE_MAGIC: [u8; 4] = *b"KPTH";
pub const PATH_FILE_VERSION: u32 = 1;

/// Writes the little-endian columnar path format:
///
/// ```text
/// 0   magic "KPTH"          4 bytes
/// 4   version               u32
/// 8   n_paths               u32
/// 12  n_steps               u32
/// 16  seed                  u64
/// 24  dt                    f64
/// 32  rate                  f64
/// 40  log-prices            (n_steps + 1) * n_paths f64, time-major
/// ..  variances             (n_steps + 1) * n_paths f64, time-major
/// ```
pub fn write_path_set<W: Write>(paths: &PathSet, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::PathFile(e.to_string());
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::PathFile("dimension exceeds u32".into()));
    let mut header = Vec::with_capacity(40);
    header.extend_from_slice(&PATH_FILE_MAGIC);
    header.extend_from_slice(&PATH_FILE_VERSION.to_le_bytes());
    header.extend_from_slice(&to_u32(paths.n_paths)?.to_le_bytes());
    header.extend_from_slice(&to_u32(paths.n_steps)?.to_le_bytes());
    header.extend_from_slice(&paths.seed.to_le_bytes());
    header.extend_from_slice(&paths.dt.to_le_bytes());
    header.extend_from_slice(&paths.rate.to_le_bytes());
    out.write_all(&header).map_err(io)?;
    let mut buf = Vec::with_capacity(paths.log_prices.len() * 8);
    for v in paths.log_prices.iter().chain(&paths.variances) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

pub fn read_path_set<R: Read>(mut input: R) -> Result<PathSet> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::PathFile(e.to_string()))?;
    if bytes.len() < 40 || bytes[..4] != PATH_FILE_MAGIC {
        return Err(Error::PathFile("not a path file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != PATH_FILE_VERSION {
        return Err(Error::PathFile(format!("unsupported version {version}")));
    }
    let (n_paths, n_steps) = (u32_at(8) as usize, u32_at(12) as usize);
    let len = (n_steps + 1) * n_paths;
    if bytes.len() != 40 + 16 * len {
        return Err(Error::PathFile(format!("expected {} bytes, found {}", 40 + 16 * len, bytes.len())));
    }
    let values: Vec<f64> = bytes[40..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (lp, var) = values.split_at(len);
    PathSet::from_parts(
        n_paths,
        n_steps,
        f64::from_bits(u64_at(24)),
        f64::from_bits(u64_at(32)),
        u64_at(16),
        lp.to_vec(),
        var.to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitoring_rule() {
        assert_eq!(monitoring_steps(1.0 / 12.0).unwrap(), 20);
        assert_eq!(monitoring_steps(0.5).unwrap(), 26);
        assert_eq!(monitoring_steps(1.0).unwrap(), 52);
        assert_eq!(monitoring_steps(2.0).unwrap(), 104);
        assert!(matches!(monitoring_steps(0.0), Err(Error::InvalidMaturity(_))));
        assert!(monitoring_steps(-1.0).is_err());
    }

    #[test]
    fn seed_layout() {
        assert_eq!(experiment_seed(0, 0, 0).unwrap(), 0);
        assert_eq!(experiment_seed(1, 2, 3).unwrap(), 27);
        assert_eq!(experiment_seed(99, 3, 3).unwrap(), 1599);
        assert!(matches!(experiment_seed(0, 4, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(experiment_seed(0, 0, 4).is_err());
    }

    #[test]
    fn inverse_cdf_reference_points() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
        assert!(inverse_normal_cdf(uniform_open(0)).is_finite());
        assert!(inverse_normal_cdf(uniform_open(u64::MAX)).is_finite());
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = HestonParams::default();
        p.rho = -1.5;
        assert!(matches!(simulate_heston(&p, 10, 1.0, 0), Err(Error::InvalidParams(_))));
        let mut p = HestonParams::default();
        p.s0 = 0.0;
        assert!(p.validate().is_err());
        assert!(simulate_heston(&HestonParams::default(), 0, 1.0, 0).is_err());
        assert!(simulate_heston(&HestonParams::default(), 1, 0.0, 0).is_err());
    }

    #[test]
    fn initial_values_and_floor() {
        let p = HestonParams { xi: 1.5, ..HestonParams::default() };
        let paths = simulate_heston(&p, 500, 1.0, 3).unwrap();
        assert!(paths.log_prices_at(0).iter().all(|&x| x == 100f64.ln()));
        assert!(paths.variances_at(0).iter().all(|&v| v == 0.04));
        assert!(paths.variances().iter().all(|&v| v >= VARIANCE_FLOOR));
        assert!(paths.variances().iter().any(|&v| v == VARIANCE_FLOOR));
    }

    #[test]
    fn zero_vol_of_vol_keeps_variance_at_theta() {
        let p = HestonParams::black_scholes(100.0, 0.2, 0.03);
        let paths = simulate_heston(&p, 200, 1.0, 1).unwrap();
        assert!(paths.variances().iter().all(|&v| v == p.theta));
    }

    #[test]
    fn same_seed_same_paths_and_prefix_stability() {
        let p = HestonParams::default();
        let a = simulate_heston(&p, 300, 0.5, 42).unwrap();
        let b = simulate_heston(&p, 300, 0.5, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_heston(&p, 100, 0.5, 42).unwrap();
        for k in 0..=a.n_steps() {
            assert_eq!(&a.log_prices_at(k)[..100], c.log_prices_at(k));
        }
        let d = simulate_heston(&p, 300, 0.5, 43).unwrap();
        assert_ne!(a.log_prices(), d.log_prices());
    }

    #[test]
    fn path_file_round_trip() {
        let paths = simulate_heston(&HestonParams::default(), 7, 1.0 / 12.0, 5).unwrap();
        let mut buf = Vec::new();
        write_path_set(&paths, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"KPTH");
        assert_eq!(buf.len(), 40 + 16 * 7 * 21);
        assert_eq!(read_path_set(&buf[..]).unwrap(), paths);
        assert!(read_path_set(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_path_set(&bad[..]).is_err());
    }

    #[test]
    fn terminal_values_match_full_paths() {
        let p = HestonParams::default();
        let paths = simulate_heston(&p, 64, 0.5, 21).unwrap();
        let terminal = simulate_terminal_log_prices(&p, 64, 0.5, 21).unwrap();
        assert_eq!(paths.log_prices_at(paths.n_steps()), &terminal[..]);
    }
}
