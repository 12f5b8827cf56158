//! Experiment configuration and its flat `key = value` file format.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated
//! and maturities accept fractions such as `1/12`. Recognized keys:
//!
//! ```text
//! n_grid           path counts                  100,1000,10000,100000
//! maturities       years                        1/12,1/2,1,2
//! moneyness_count  strikes per maturity         10
//! replications     repetitions per cell         100
//! lambda_rule      regularization rule          n^-1/2
//! epsilon          relative Cholesky tolerance  1e-5
//! methods          subset of cme_lr,ls          cme_lr,ls
//! ls_degree        LS polynomial degree         4
//! reference_paths  European MC reference size   1000000
//! threads          work pool size, 0 = all      0
//! output_dir       where CSV files go           (unset)
//! s0 v0 r kappa theta xi rho                    Heston parameters
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use kcme::market::HestonParams;
use kcme::pricing::PricingMethod;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Environment variable naming the output directory.
pub const OUTPUT_DIR_ENV: &str = "KCME_OUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "kcme-results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LambdaRule {
    /// `lambda = n^(-1/2)`.
    #[default]
    InverseSqrtN,
}

impl LambdaRule {
    pub fn lambda(&self, n: usize) -> f64 {
        match self {
            LambdaRule::InverseSqrtN => (n as f64).powf(-0.5),
        }
    }
}

impl FromStr for LambdaRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace() && *c != '{' && *c != '}').collect();
        match compact.as_str() {
            "n^-1/2" | "n^-0.5" | "1/sqrt(n)" => Ok(LambdaRule::InverseSqrtN),
            _ => Err(format!("unknown lambda rule {s:?}; only n^-1/2 is supported")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    pub maturities: Vec<f64>,
    pub moneyness_count: usize,
    pub replications: usize,
    pub lambda_rule: LambdaRule,
    pub epsilon: f64,
    pub heston: HestonParams,
    pub methods: Vec<PricingMethod>,
    pub ls_degree: usize,
    pub reference_paths: usize,
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_grid: vec![100, 1_000, 10_000, 100_000],
            maturities: vec![1.0 / 12.0, 0.5, 1.0, 2.0],
            moneyness_count: 10,
            replications: 100,
            lambda_rule: LambdaRule::InverseSqrtN,
            epsilon: 1e-5,
            heston: HestonParams::default(),
            methods: vec![PricingMethod::CmeLr, PricingMethod::Ls],
            ls_degree: 4,
            reference_paths: 1_000_000,
            threads: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Laptop-sized grid: `n <= 1000`, 20 replications.
    pub fn desk() -> Self {
        ExperimentConfig { n_grid: vec![100, 1_000], replications: 20, ..Self::default() }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|message| BenchError::Config { line: i + 1, message })?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let h = &mut self.heston;
        match key {
            "n_grid" => self.n_grid = parse_list(value, parse_count)?,
            "maturities" => self.maturities = parse_list(value, parse_fraction)?,
            "moneyness_count" => self.moneyness_count = parse_count(value)?,
            "replications" => self.replications = parse_count(value)?,
            "lambda_rule" => self.lambda_rule = value.parse()?,
            "epsilon" => self.epsilon = parse_f64(value)?,
            "methods" => self.methods = parse_methods(value)?,
            "ls_degree" => self.ls_degree = parse_count(value)?,
            "reference_paths" => self.reference_paths = parse_count(value)?,
            "threads" => self.threads = value.parse().map_err(|e| format!("threads: {e}"))?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "s0" => h.s0 = parse_f64(value)?,
            "v0" => h.v0 = parse_f64(value)?,
            "r" => h.r = parse_f64(value)?,
            "kappa" => h.kappa = parse_f64(value)?,
            "theta" => h.theta = parse_f64(value)?,
            "xi" => h.xi = parse_f64(value)?,
            "rho" => h.rho = parse_f64(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.n_grid.is_empty() || self.maturities.is_empty() || self.methods.is_empty() {
            return bad("n_grid, maturities and methods must be non-empty".into());
        }
        if self.n_grid.len() > 4 || self.maturities.len() > 4 {
            return bad("the seed layout allows at most 4 path counts and 4 maturities".into());
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return bad("path counts must be at least 2".into());
        }
        if self.maturities.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return bad("maturities must be positive".into());
        }
        if self.moneyness_count < 2 {
            return Err(BenchError::InvalidCount(self.moneyness_count));
        }
        if self.replications == 0 || self.ls_degree == 0 || self.reference_paths < 2 {
            return bad("replications, ls_degree and reference_paths must be positive".into());
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(m) = self.methods.iter().find(|m| !matches!(m, PricingMethod::CmeLr | PricingMethod::Ls)) {
            return bad(format!("method {m} cannot be benchmarked"));
        }
        self.heston.validate()?;
        Ok(())
    }

    /// `--out` flag, then the environment variable, then the config file.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

pub fn parse_list<T>(
    value: &str,
    item: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    // Accepts 1e5 style counts as well.
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let v = parse_f64(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(format!("{s:?} is not a count"))
    }
}

/// `0.5`, `1/12`.
pub fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => Ok(parse_f64(a.trim())? / parse_f64(b.trim())?),
        None => parse_f64(s),
    }
}

fn parse_methods(s: &str) -> std::result::Result<Vec<PricingMethod>, String> {
    parse_list(s, |m| m.parse::<PricingMethod>().map_err(|e| e.to_string()))
}
