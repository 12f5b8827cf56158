//! Kernel families, lazily evaluated kernel matrices and the median-heuristic
//! lengthscale.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::PsdMatrixSource;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Above this many points the median heuristic works on a fixed subsample.
pub const MEDIAN_SUBSAMPLE: usize = 2000;

/// Seed of the median-heuristic subsample.
pub const MEDIAN_SUBSAMPLE_SEED: u64 = 0x6d65_6469_616e;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `(offset + x . x')^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `(1 + sqrt(3) r / l) exp(-sqrt(3) r / l)`
    Matern32 { lengthscale: f64 },
    /// `exp(-r^2 / (2 l^2))`
    Gaussian { lengthscale: f64 },
}

impl KernelSpec {
    pub fn polynomial(degree: u32) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree, offset: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern32(lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec::Matern32 { lengthscale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { lengthscale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::InvalidInput("polynomial degree must be >= 1".into()));
                }
                if !(offset >= 0.0) || !offset.is_finite() {
                    return Err(Error::InvalidInput(format!("polynomial offset {offset} < 0")));
                }
            }
            KernelSpec::Matern32 { lengthscale } | KernelSpec::Gaussian { lengthscale } => {
                if !(lengthscale > 0.0) || !lengthscale.is_finite() {
                    return Err(Error::InvalidInput(format!("lengthscale must be positive, got {lengthscale}")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != x2.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: x2.len() });
        }
        Ok(self.eval_unchecked(x, x2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(x2).map(|(a, b)| a * b).sum();
                (offset + dot).powi(degree as i32)
            }
            KernelSpec::Matern32 { lengthscale } => {
                let r = if x.len() == 1 { (x[0] - x2[0]).abs() } else { euclidean(x, x2) };
                matern32(r / lengthscale)
            }
            KernelSpec::Gaussian { lengthscale } => {
                let r2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * r2 / (lengthscale * lengthscale)).exp()
            }
        }
    }
}

#[inline]
fn matern32(scaled: f64) -> f64 {
    let s = SQRT_3 * scaled;
    (1.0 + s) * (-s).exp()
}

fn euclidean(x: &[f64], x2: &[f64]) -> f64 {
    x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    data: Vec<f64>,
    dim: usize,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("sample dimension must be positive".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim * (data.len() / dim).max(1), found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite entries".into()));
        }
        Ok(SampleMatrix { data, dim })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    /// Zips equally long coordinate columns into points.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let dim = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(data, dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> SampleMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleMatrix { data, dim: self.dim }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x, x2)
}

/// Kernel matrix of a sample, evaluated column by column on request.
#[derive(Debug, Clone, Copy)]
pub struct KernelMatrixSource<'a> {
    spec: KernelSpec,
    samples: &'a SampleMatrix,
}

pub fn kernel_matrix_source<'a>(spec: &KernelSpec, samples: &'a SampleMatrix) -> KernelMatrixSource<'a> {
    KernelMatrixSource { spec: *spec, samples }
}

impl<'a> KernelMatrixSource<'a> {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn samples(&self) -> &'a SampleMatrix {
        self.samples
    }
}

impl PsdMatrixSource for KernelMatrixSource<'_> {
    fn dim(&self) -> usize {
        self.samples.len()
    }

    fn diag(&self, i: usize) -> f64 {
        let x = self.samples.row(i);
        self.spec.eval_unchecked(x, x)
    }

    fn column_into(&self, i: usize, out: &mut [f64]) {
        kernel_column(&self.spec, self.samples, self.samples.row(i), out);
    }
}

/// `out[j] = k(samples_j, x)`.
pub fn kernel_column(spec: &KernelSpec, samples: &SampleMatrix, x: &[f64], out: &mut [f64]) {
    match (*spec, samples.dim()) {
        (KernelSpec::Matern32 { lengthscale }, 1) => {
            let (c, inv) = (x[0], 1.0 / lengthscale);
            for (o, &y) in out.iter_mut().zip(samples.as_slice()) {
                *o = matern32((y - c).abs() * inv);
            }
        }
        (KernelSpec::Polynomial { degree, offset }, 2) => {
            let (a, b) = (x[0], x[1]);
            for (o, p) in out.iter_mut().zip(samples.as_slice().chunks_exact(2)) {
                *o = (offset + a * p[0] + b * p[1]).powi(degree as i32);
            }
        }
        _ => {
            for (o, row) in out.iter_mut().zip(samples.rows()) {
                *o = spec.eval_unchecked(row, x);
            }
        }
    }
}

/// Median of the pairwise distances `|y_i - y_j|`, `i < j`.
pub fn median_heuristic(values: &[f64]) -> Result<f64> {
    median_heuristic_rows(&SampleMatrix::from_scalars(values)?)
}

/// Median pairwise Euclidean distance between the rows of `samples`.
///
/// The lower median is taken for an even pair count. Samples larger than
/// [`MEDIAN_SUBSAMPLE`] are reduced to a subsample drawn with
/// [`MEDIAN_SUBSAMPLE_SEED`].
pub fn median_heuristic_rows(samples: &SampleMatrix) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateSample("median heuristic needs at least two points"));
    }
    let idx = subsample_indices(n, MEDIAN_SUBSAMPLE, MEDIAN_SUBSAMPLE_SEED);
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        let xi = samples.row(i);
        for &j in &idx[a + 1..] {
            dists.push(euclidean(xi, samples.row(j)));
        }
    }
    let k = dists.len().div_ceil(2) - 1;
    let (_, median, _) = dists.select_nth_unstable_by(k, f64::total_cmp);
    let median = *median;
    if median <= 0.0 {
        return Err(Error::DegenerateSample("median pairwise distance is zero"));
    }
    Ok(median)
}

/// Sorted indices of a uniform subsample of size `min(n, limit)`.
fn subsample_indices(n: usize, limit: usize, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    if n <= limit {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..limit {
        let span = (n - i) as u64;
        let j = i + (rng.next_u64() % span) as usize;
        all.swap(i, j);
    }
    all.truncate(limit);
    all.sort_unstable();
    all
}
