//! Adaptive pivoted Cholesky factorization with a biorthogonal basis, and the
//! spectral rotation that turns the basis double-orthogonal.
//!
//! The factorization only ever touches the diagonal and the pivot columns of
//! the input, so a kernel matrix never has to be assembled. For `K` of size
//! `n` and a returned rank `m`:
//!
//! * `trace(K - L L^T) <= tolerance`
//! * `B^T L = I_m`, `K B = L`
//! * `B` has nonzero rows only at the pivot indices, stored here as the dense
//!   `m x m` block of those rows (row `r` belongs to pivot `r`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schur diagonal entries above `-PSD_SLACK * trace(K)` are treated as
/// roundoff; anything more negative means the input was not PSD.
pub const PSD_SLACK: f64 = 1e-12;

/// Entries at or below this many ulps of the largest diagonal are zero.
const NOISE_FLOOR_ULPS: f64 = 32.0;

/// On-demand access to a symmetric positive semidefinite matrix.
pub trait PsdMatrixSource {
    fn dim(&self) -> usize;

    fn diag(&self, i: usize) -> f64;

    /// Writes column `i` into `out`, which has length `dim()`.
    fn column_into(&self, i: usize, out: &mut [f64]);

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.diag(i)).collect()
    }

    fn column(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.column_into(i, &mut out);
        out
    }
}

impl PsdMatrixSource for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn diag(&self, i: usize) -> f64 {
        self[(i, i)]
    }

    fn column_into(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.column(i).as_slice());
    }
}

impl<S: PsdMatrixSource + ?Sized> PsdMatrixSource for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn diag(&self, i: usize) -> f64 {
        (**self).diag(i)
    }

    fn column_into(&self, i: usize, out: &mut [f64]) {
        (**self).column_into(i, out)
    }

    fn diagonal(&self) -> Vec<f64> {
        (**self).diagonal()
    }
}

/// Stopping rule for the factorization, in units of the residual trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TraceTolerance {
    /// Stop once `trace(K - L L^T) <= eps`.
    Absolute(f64),
    /// Stop once `trace(K - L L^T) <= eps * trace(K)`.
    Relative(f64),
}

impl TraceTolerance {
    pub fn value(&self) -> f64 {
        match *self {
            TraceTolerance::Absolute(eps) | TraceTolerance::Relative(eps) => eps,
        }
    }

    /// Absolute residual-trace threshold for a matrix with the given trace.
    pub fn resolve(&self, trace: f64) -> f64 {
        match *self {
            TraceTolerance::Absolute(eps) => eps,
            TraceTolerance::Relative(eps) => eps * trace,
        }
    }
}

/// Output of [`pivoted_cholesky`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactors {
    l: DMatrix<f64>,
    b_pivot: DMatrix<f64>,
    pivots: Vec<usize>,
    residual_trace: f64,
    residual_history: Vec<f64>,
    tolerance: f64,
    trace: f64,
}

impl LowRankFactors {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Cholesky factor, `n x m`.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Rows of `B` at the pivot indices, `m x m` and lower triangular.
    pub fn b_pivot(&self) -> &DMatrix<f64> {
        &self.b_pivot
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// `trace(K - L L^T)` at termination.
    pub fn residual_trace(&self) -> f64 {
        self.residual_trace
    }

    /// Residual trace after each accepted pivot; entry 0 is `trace(K)`.
    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// The absolute threshold the factorization ran against.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `B` expanded to `n x m`.
    pub fn b_dense(&self) -> DMatrix<f64> {
        scatter_rows(&self.b_pivot, &self.pivots, self.dim())
    }
}

/// Greedy pivoted Cholesky of a PSD matrix with a simultaneous biorthogonal
/// basis.
///
/// Pivots on the largest remaining Schur-complement diagonal entry (smallest
/// index on ties) until the residual trace drops to `tolerance` or the rank
/// reaches `max_rank`. Requests exactly one column per accepted pivot.
pub fn pivoted_cholesky<S: PsdMatrixSource + ?Sized>(
    source: &S,
    tolerance: f64,
    max_rank: Option<usize>,
) -> Result<LowRankFactors> {
    if !(tolerance >= 0.0) || !tolerance.is_finite() {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let n = source.dim();
    if n == 0 {
        return Err(Error::DegenerateSample("empty matrix"));
    }
    let max_rank = match max_rank {
        Some(0) => return Err(Error::InvalidInput("max_rank must be positive".into())),
        Some(r) if r > n => return Err(Error::InvalidInput(format!("max_rank {r} exceeds matrix dimension {n}"))),
        Some(r) => r,
        None => n,
    };

    let mut d = source.diagonal();
    let trace: f64 = d.iter().sum();
    let max_diag = d.iter().cloned().fold(0.0, f64::max);
    let psd_slack = PSD_SLACK * trace.abs();
    let floor = NOISE_FLOOR_ULPS * f64::EPSILON * max_diag;
    let mut err = clamp_diagonal(&mut d, psd_slack, floor)?;

    let mut l_data: Vec<f64> = Vec::new();
    // b_cols[j] holds b_j at pivot rows 0..=j.
    let mut b_cols: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut history = vec![err];
    let mut col = vec![0.0; n];

    while err > tolerance && pivots.len() < max_rank {
        let Some(p) = argmax_positive(&d) else { break };
        let m = pivots.len();
        let dp = d[p];
        let sqrt_dp = dp.sqrt();

        source.column_into(p, &mut col);
        subtract_projections(&mut col, &l_data, n, m, p);
        let inv = 1.0 / sqrt_dp;
        for c in col.iter_mut() {
            *c *= inv;
        }
        // Exact zeros of the Schur column at earlier pivots keep L's pivot
        // block triangular.
        for &q in &pivots {
            col[q] = 0.0;
        }
        col[p] = sqrt_dp;

        let mut b = vec![0.0; m + 1];
        for (r, br) in b.iter_mut().enumerate().take(m) {
            let mut acc = 0.0;
            for j in r..m {
                acc += b_cols[j][r] * l_data[j * n + p];
            }
            *br = -acc * inv;
        }
        b[m] = inv;
        b_cols.push(b);

        for (di, &li) in d.iter_mut().zip(&col) {
            *di -= li * li;
        }
        d[p] = 0.0;
        err = clamp_diagonal(&mut d, psd_slack, floor)?;

        l_data.extend_from_slice(&col);
        pivots.push(p);
        history.push(err);
    }

    let m = pivots.len();
    let l = DMatrix::from_vec(n, m, l_data);
    let b_pivot = DMatrix::from_fn(m, m, |r, j| if r <= j { b_cols[j][r] } else { 0.0 });

    Ok(LowRankFactors { l, b_pivot, pivots, residual_trace: err, residual_history: history, tolerance, trace })
}

/// Runs [`pivoted_cholesky`] with a tolerance resolved against `trace(K)`.
pub fn pivoted_cholesky_with<S: PsdMatrixSource + ?Sized>(
    source: &S,
    tolerance: TraceTolerance,
    max_rank: Option<usize>,
) -> Result<LowRankFactors> {
    let eps = tolerance.value();
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidTolerance(eps));
    }
    let threshold = match tolerance {
        TraceTolerance::Absolute(eps) => eps,
        TraceTolerance::Relative(_) => {
            let trace: f64 = (0..source.dim()).map(|i| source.diag(i)).sum();
            tolerance.resolve(trace)
        }
    };
    pivoted_cholesky(source, threshold, max_rank)
}

// col -= sum_j L[p, j] L[:, j], four columns per sweep.
fn subtract_projections(col: &mut [f64], l_data: &[f64], n: usize, m: usize, p: usize) {
    let mut j = 0;
    while j + 4 <= m {
        let c = |k: usize| &l_data[(j + k) * n..(j + k + 1) * n];
        let (l0, l1, l2, l3) = (c(0), c(1), c(2), c(3));
        let (a0, a1, a2, a3) = (l0[p], l1[p], l2[p], l3[p]);
        for ((((c, x0), x1), x2), x3) in col.iter_mut().zip(l0).zip(l1).zip(l2).zip(l3) {
            *c -= a0 * x0 + a1 * x1 + a2 * x2 + a3 * x3;
        }
        j += 4;
    }
    for j in j..m {
        let lj = &l_data[j * n..(j + 1) * n];
        let a = lj[p];
        for (c, &x) in col.iter_mut().zip(lj) {
            *c -= a * x;
        }
    }
}

fn clamp_diagonal(d: &mut [f64], psd_slack: f64, floor: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (i, di) in d.iter_mut().enumerate() {
        if *di < -psd_slack || di.is_nan() {
            return Err(Error::NonPsdInput { index: i, value: *di });
        }
        if *di <= floor {
            *di = 0.0;
        }
        sum += *di;
    }
    Ok(sum)
}

fn argmax_positive(d: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in d.iter().enumerate() {
        if v > 0.0 && best.map_or(true, |b| v > d[b]) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn scatter_rows(block: &DMatrix<f64>, rows: &[usize], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, block.ncols());
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(i).copy_from(&block.row(r));
    }
    out
}

/// Double-orthogonal basis `Q = B V` with `V Λ V^T = L^T L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    v: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    q_pivot: DMatrix<f64>,
    pivots: Vec<usize>,
    dim: usize,
}

impl SpectralBasis {
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Descending, nonnegative.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Rows of `Q` at the pivot indices.
    pub fn q_pivot(&self) -> &DMatrix<f64> {
        &self.q_pivot
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        scatter_rows(&self.q_pivot, &self.pivots, self.dim)
    }
}

/// Eigendecomposition of `L^T L` and the rotated basis `Q = B V`.
///
/// Eigenvalues come out descending; each eigenvector is signed so that its
/// largest-magnitude component (first one on ties) is positive.
pub fn spectral_rotation(factors: &LowRankFactors) -> Result<SpectralBasis> {
    let m = factors.rank();
    if m == 0 {
        return Err(Error::DegenerateSample("factorization has rank 0"));
    }
    let gram = factors.l.transpose() * &factors.l;
    let (v, eigenvalues) = sorted_symmetric_eigen(gram)?;
    let q_pivot = &factors.b_pivot * &v;
    Ok(SpectralBasis { v, eigenvalues, q_pivot, pivots: factors.pivots.clone(), dim: factors.dim() })
}

pub(crate) fn sorted_symmetric_eigen(a: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = a.nrows();
    let eig = SymmetricEigen::try_new(a, 1e-15, 0)
        .ok_or(Error::InvalidInput("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let mut v = DMatrix::zeros(m, m);
    let mut lambda = DVector::zeros(m);
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for i in 1..m {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        v.column_mut(k).copy_from(&(col * sign));
        lambda[k] = eig.eigenvalues[src].max(0.0);
    }
    Ok((v, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::cell::Cell;

    struct Counting<'a> {
        inner: &'a DMatrix<f64>,
        columns: Cell<usize>,
    }

    impl PsdMatrixSource for Counting<'_> {
        fn dim(&self) -> usize {
            self.inner.nrows()
        }
        fn diag(&self, i: usize) -> f64 {
            self.inner[(i, i)]
        }
        fn column_into(&self, i: usize, out: &mut [f64]) {
            self.columns.set(self.columns.get() + 1);
            self.inner.column_into(i, out)
        }
    }

    fn lcg_matrix(rows: usize, cols: usize, mut state: u64) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let g = lcg_matrix(n, rank, seed);
        &g * g.transpose()
    }

    #[test]
    fn identity_takes_every_pivot_in_order() {
        let k = DMatrix::<f64>::identity(3, 3);
        let f = pivoted_cholesky(&k, 0.0, None).unwrap();
        assert_eq!(f.pivots(), &[0, 1, 2]);
        assert_eq!(f.residual_trace(), 0.0);
        assert_abs_diff_eq!(f.l().tr_mul(f.l()), DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn rank_one_two_by_two_by_hand() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let f = pivoted_cholesky(&k, 1e-12, None).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.pivots(), &[1]);
        assert_abs_diff_eq!(f.l()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.l()[(1, 0)], 2.0, epsilon = 1e-15);
        let b = f.b_dense();
        assert_eq!(b[(0, 0)], 0.0);
        assert_abs_diff_eq!(b[(1, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(f.residual_trace(), 0.0);
    }

    #[test]
    fn random_eight_by_eight_against_dense_eigen() {
        let k = random_psd(8, 8, 42);
        let f = pivoted_cholesky(&k, 1e-10, None).unwrap();
        let resid = &k - f.l() * f.l().transpose();
        assert!(resid.trace() <= 1e-10);
        let min_eig = resid.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-10 * k.trace(), "{min_eig}");
    }

    #[test]
    fn rejects_bad_tolerances_and_ranks() {
        let k = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(pivoted_cholesky(&k, -1.0, None), Err(Error::InvalidTolerance(_))));
        assert!(matches!(pivoted_cholesky(&k, f64::NAN, None), Err(Error::InvalidTolerance(_))));
        assert!(pivoted_cholesky(&k, 0.1, Some(3)).is_err());
        assert!(pivoted_cholesky(&k, 0.1, Some(0)).is_err());
    }

    #[test]
    fn indefinite_input_is_reported() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(pivoted_cholesky(&k, 0.0, None), Err(Error::NonPsdInput { index: 1, .. })));
        let k = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(pivoted_cholesky(&k, 0.0, None), Err(Error::NonPsdInput { index: 0, .. })));
    }

    #[test]
    fn one_column_request_per_pivot() {
        let k = random_psd(40, 12, 7);
        let src = Counting { inner: &k, columns: Cell::new(0) };
        let f = pivoted_cholesky(&src, 1e-8, None).unwrap();
        assert_eq!(src.columns.get(), f.rank());
    }

    #[test]
    fn recovers_exact_rank() {
        for (rank, seed) in [(1, 1), (3, 2), (7, 3), (15, 4)] {
            let k = random_psd(30, rank, seed);
            let f = pivoted_cholesky(&k, 0.0, None).unwrap();
            assert_eq!(f.rank(), rank);
        }
    }

    #[test]
    fn max_rank_caps_the_loop() {
        let k = random_psd(20, 20, 9);
        let f = pivoted_cholesky(&k, 0.0, Some(5)).unwrap();
        assert_eq!(f.rank(), 5);
        assert!(f.residual_trace() > 0.0);
    }

    #[test]
    fn relative_tolerance_scales_with_trace() {
        let k = random_psd(30, 30, 5) * 1e6;
        let abs = pivoted_cholesky(&k, 1e-3 * k.trace(), None).unwrap();
        let rel = pivoted_cholesky_with(&k, TraceTolerance::Relative(1e-3), None).unwrap();
        assert_eq!(abs.pivots(), rel.pivots());
    }

    #[test]
    fn scalar_spectral_rotation() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let f = pivoted_cholesky(&k, 1e-12, None).unwrap();
        let s = spectral_rotation(&f).unwrap();
        assert_abs_diff_eq!(s.eigenvalues()[0], 5.0, epsilon = 1e-14);
        assert_eq!(s.v()[(0, 0)], 1.0);
        assert_abs_diff_eq!(s.q_dense(), f.b_dense(), epsilon = 1e-15);
    }

    #[test]
    fn identity_spectral_rotation() {
        let k = DMatrix::<f64>::identity(4, 4);
        let s = spectral_rotation(&pivoted_cholesky(&k, 0.0, None).unwrap()).unwrap();
        assert_abs_diff_eq!(s.eigenvalues().clone(), DVector::from_element(4, 1.0), epsilon = 1e-14);
        let q = s.q_dense();
        assert_abs_diff_eq!(q.transpose() * &k * &q, DMatrix::identity(4, 4), epsilon = 1e-14);
    }

    #[test]
    fn twenty_by_twenty_double_orthogonality() {
        let k = random_psd(20, 20, 11);
        let s = spectral_rotation(&pivoted_cholesky(&k, 1e-8, None).unwrap()).unwrap();
        let q = s.q_dense();
        let m = q.ncols();
        let lam_max = s.eigenvalues()[0];
        let kq = &k * &q;
        let second = kq.transpose() * &kq;
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { s.eigenvalues()[i] } else { 0.0 };
                assert!((second[(i, j)] - expect).abs() <= 1e-6 * lam_max);
            }
        }
        assert_abs_diff_eq!(q.transpose() * &kq, DMatrix::identity(m, m), epsilon = 1e-6);
    }

    #[test]
    fn eigenvector_sign_convention() {
        let k = random_psd(15, 15, 13);
        let s = spectral_rotation(&pivoted_cholesky(&k, 1e-10, None).unwrap()).unwrap();
        for col in s.v().column_iter() {
            let lead = col.iamax();
            assert!(col[lead] > 0.0);
        }
        let ev = s.eigenvalues();
        assert!(ev.iter().zip(ev.iter().skip(1)).all(|(a, b)| a >= b));
    }
}
