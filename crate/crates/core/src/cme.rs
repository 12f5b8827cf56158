//! Conditional mean embeddings: the dense full-rank estimator, the low-rank
//! operator built from two pivoted Cholesky factorizations, and the tools used
//! to compare them.
//!
//! Both estimators have the bilinear form `Phi_Y(.) A Phi_X(.)^T` with an
//! `n x n` coefficient matrix `A`:
//!
//! * full rank: `A = F = (K_X + n lambda I)^-1`
//! * low rank: `A = Q_Y F~ Q_X^T` with
//!   `F~ = (L_Y V_Y)^T (L_X V_X) (Lambda_X + n lambda I)^-1`
//!
//! The conditional expectation of `f(Y)` given `X = x` is then
//! `[f(y_1), ..., f(y_n)] A Phi_X(x)^T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_column, kernel_matrix_source, KernelSpec, SampleMatrix};
use crate::lowrank::{pivoted_cholesky_with, spectral_rotation, LowRankFactors, SpectralBasis, TraceTolerance};

/// Largest sample the dense estimator accepts.
pub const FULL_RANK_LIMIT: usize = 5000;

/// Queries are evaluated in blocks of this size.
pub const QUERY_BLOCK: usize = 4096;

fn check_training(x: &SampleMatrix, y: &SampleMatrix, lambda: f64) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    Ok(x.len())
}

/// Dense kernel matrix; test and oracle scale only.
pub fn dense_kernel_matrix(spec: &KernelSpec, samples: &SampleMatrix) -> DMatrix<f64> {
    let n = samples.len();
    let mut k = DMatrix::zeros(n, n);
    for (i, mut col) in k.column_iter_mut().enumerate() {
        kernel_column(spec, samples, samples.row(i), col.as_mut_slice());
    }
    k
}

/// Full-rank estimator `F = (K_X + n lambda I)^-1`.
#[derive(Debug, Clone)]
pub struct FullCmeOperator {
    f: DMatrix<f64>,
    x_train: SampleMatrix,
    y_train: SampleMatrix,
    kernel_x: KernelSpec,
    lambda: f64,
}

pub fn fit_full_cme(
    x_train: &SampleMatrix,
    y_train: &SampleMatrix,
    kernel_x: &KernelSpec,
    lambda: f64,
) -> Result<FullCmeOperator> {
    let n = check_training(x_train, y_train, lambda)?;
    kernel_x.validate()?;
    if n > FULL_RANK_LIMIT {
        return Err(Error::InvalidInput(format!("full-rank CME limited to n <= {FULL_RANK_LIMIT}, got {n}")));
    }
    let mut system = dense_kernel_matrix(kernel_x, x_train);
    for i in 0..n {
        system[(i, i)] += n as f64 * lambda;
    }
    let f = system.cholesky().ok_or(Error::SingularSystem)?.inverse();
    Ok(FullCmeOperator { f, x_train: x_train.clone(), y_train: y_train.clone(), kernel_x: *kernel_x, lambda })
}

impl FullCmeOperator {
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn x_train(&self) -> &SampleMatrix {
        &self.x_train
    }

    pub fn y_train(&self) -> &SampleMatrix {
        &self.y_train
    }

    /// `[f(y_1), ..., f(y_n)] F Phi_X(x)^T` for every query row.
    pub fn predict(&self, f_values: &[f64], queries: &SampleMatrix) -> Result<Vec<f64>> {
        let n = self.n();
        if f_values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f_values.len() });
        }
        if queries.dim() != self.x_train.dim() {
            return Err(Error::DimensionMismatch { expected: self.x_train.dim(), found: queries.dim() });
        }
        let w = self.f.tr_mul(&DVector::from_column_slice(f_values));
        let mut phi = vec![0.0; n];
        Ok(queries
            .rows()
            .map(|x| {
                kernel_column(&self.kernel_x, &self.x_train, x, &mut phi);
                w.iter().zip(&phi).map(|(a, b)| a * b).sum()
            })
            .collect())
    }
}

/// Trained low-rank conditional expectation operator.
///
/// Only the pivot rows of `Q_X` and `Q_Y` are kept, since `B` vanishes
/// elsewhere; evaluation touches `f` at the `m_Y` pivots of the `Y` sample and
/// the kernel at the `m_X` pivot states of the `X` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CmeRecord", into = "CmeRecord")]
pub struct CmeOperator {
    q_x: DMatrix<f64>,
    q_y: DMatrix<f64>,
    f_tilde: DMatrix<f64>,
    lambda_x: DVector<f64>,
    pivot_states_x: SampleMatrix,
    pivot_indices_x: Vec<usize>,
    pivot_indices_y: Vec<usize>,
    kernel_x: KernelSpec,
    kernel_y: KernelSpec,
    lambda: f64,
    epsilon: TraceTolerance,
    n: usize,
    summary: TrainingSummary,
    // Q_Y F~ Q_X^T restricted to pivot rows and columns, m_Y x m_X.
    fold: DMatrix<f64>,
}

/// Flat record of a [`CmeOperator`] for moving it between processes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmeRecord {
    pub q_x: DMatrix<f64>,
    pub q_y: DMatrix<f64>,
    pub f_tilde: DMatrix<f64>,
    pub lambda_x: DVector<f64>,
    pub pivot_states_x: SampleMatrix,
    pub pivot_indices_x: Vec<usize>,
    pub pivot_indices_y: Vec<usize>,
    pub kernel_x: KernelSpec,
    pub kernel_y: KernelSpec,
    pub lambda: f64,
    pub epsilon: TraceTolerance,
    pub n: usize,
    pub summary: TrainingSummary,
}

/// Scalars of the training kernel matrices needed by the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub trace_kx: f64,
    pub trace_ky: f64,
    /// `max_i k_X(x_i, x_i)`.
    pub max_diag_kx: f64,
    /// Residual-trace thresholds the two factorizations stopped at.
    pub threshold_x: f64,
    pub threshold_y: f64,
    pub residual_x: f64,
    pub residual_y: f64,
}

impl TryFrom<CmeRecord> for CmeOperator {
    type Error = Error;

    fn try_from(r: CmeRecord) -> Result<Self> {
        let (mx, my) = (r.pivot_indices_x.len(), r.pivot_indices_y.len());
        if mx == 0 || my == 0 {
            return Err(Error::DegenerateSample("operator with empty basis"));
        }
        let shapes = [
            (r.q_x.shape(), (mx, mx)),
            (r.q_y.shape(), (my, my)),
            (r.f_tilde.shape(), (my, mx)),
            ((r.lambda_x.len(), 1), (mx, 1)),
            ((r.pivot_states_x.len(), 1), (mx, 1)),
        ];
        for (found, expected) in shapes {
            if found != expected {
                return Err(Error::DimensionMismatch { expected: expected.0, found: found.0 });
            }
        }
        if r.pivot_indices_x.iter().chain(&r.pivot_indices_y).any(|&i| i >= r.n) {
            return Err(Error::IndexOutOfRange { index: r.n, limit: r.n });
        }
        let fold = &r.q_y * &r.f_tilde * r.q_x.transpose();
        Ok(CmeOperator {
            q_x: r.q_x,
            q_y: r.q_y,
            f_tilde: r.f_tilde,
            lambda_x: r.lambda_x,
            pivot_states_x: r.pivot_states_x,
            pivot_indices_x: r.pivot_indices_x,
            pivot_indices_y: r.pivot_indices_y,
            kernel_x: r.kernel_x,
            kernel_y: r.kernel_y,
            lambda: r.lambda,
            epsilon: r.epsilon,
            n: r.n,
            summary: r.summary,
            fold,
        })
    }
}

impl From<CmeOperator> for CmeRecord {
    fn from(op: CmeOperator) -> Self {
        CmeRecord {
            q_x: op.q_x,
            q_y: op.q_y,
            f_tilde: op.f_tilde,
            lambda_x: op.lambda_x,
            pivot_states_x: op.pivot_states_x,
            pivot_indices_x: op.pivot_indices_x,
            pivot_indices_y: op.pivot_indices_y,
            kernel_x: op.kernel_x,
            kernel_y: op.kernel_y,
            lambda: op.lambda,
            epsilon: op.epsilon,
            n: op.n,
            summary: op.summary,
        }
    }
}

impl CmeOperator {
    pub fn rank_x(&self) -> usize {
        self.pivot_indices_x.len()
    }

    pub fn rank_y(&self) -> usize {
        self.pivot_indices_y.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> TraceTolerance {
        self.epsilon
    }

    pub fn kernel_x(&self) -> &KernelSpec {
        &self.kernel_x
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    pub fn kernel_y(&self) -> &KernelSpec {
        &self.kernel_y
    }

    pub fn f_tilde(&self) -> &DMatrix<f64> {
        &self.f_tilde
    }

    pub fn lambda_x(&self) -> &DVector<f64> {
        &self.lambda_x
    }

    /// Pivot rows of `Q_X`, `m_X x m_X`.
    pub fn q_x_pivot(&self) -> &DMatrix<f64> {
        &self.q_x
    }

    /// Pivot rows of `Q_Y`, `m_Y x m_Y`.
    pub fn q_y_pivot(&self) -> &DMatrix<f64> {
        &self.q_y
    }

    pub fn pivot_states_x(&self) -> &SampleMatrix {
        &self.pivot_states_x
    }

    pub fn pivot_indices_x(&self) -> &[usize] {
        &self.pivot_indices_x
    }

    pub fn pivot_indices_y(&self) -> &[usize] {
        &self.pivot_indices_y
    }

    /// Full `n x n` coefficient matrix `Q_Y F~ Q_X^T`; test scale only.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (r, &i) in self.pivot_indices_y.iter().enumerate() {
            for (c, &j) in self.pivot_indices_x.iter().enumerate() {
                a[(i, j)] = self.fold[(r, c)];
            }
        }
        a
    }

    /// Collapses `f` (values at the `n` training outputs) into one weight per
    /// pivot state: `w = Q_X F~^T Q_Y^T f` on pivot rows.
    pub fn weights(&self, f_values: &[f64]) -> Result<DVector<f64>> {
        if f_values.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: f_values.len() });
        }
        let f_piv = DVector::from_iterator(self.rank_y(), self.pivot_indices_y.iter().map(|&i| f_values[i]));
        Ok(self.fold.tr_mul(&f_piv))
    }

    /// `sum_r w_r k_X(x_{p_r}, x)` for each query row, written into `out`.
    pub fn evaluate_weights(&self, weights: &DVector<f64>, queries: &SampleMatrix, out: &mut [f64]) -> Result<()> {
        if queries.dim() != self.pivot_states_x.dim() {
            return Err(Error::DimensionMismatch { expected: self.pivot_states_x.dim(), found: queries.dim() });
        }
        if out.len() != queries.len() || weights.len() != self.rank_x() {
            return Err(Error::DimensionMismatch { expected: queries.len(), found: out.len() });
        }
        let pivots = &self.pivot_states_x;
        match (self.kernel_x, pivots.dim()) {
            (KernelSpec::Polynomial { degree, offset }, 2) => {
                let p = pivots.as_slice();
                for (o, x) in out.iter_mut().zip(queries.as_slice().chunks_exact(2)) {
                    let mut acc = 0.0;
                    for (r, w) in weights.iter().enumerate() {
                        acc += w * (offset + p[2 * r] * x[0] + p[2 * r + 1] * x[1]).powi(degree as i32);
                    }
                    *o = acc;
                }
            }
            _ => {
                let mut phi = vec![0.0; self.rank_x()];
                for (block_out, block) in
                    out.chunks_mut(QUERY_BLOCK).zip(queries.as_slice().chunks(QUERY_BLOCK * queries.dim()))
                {
                    for (o, x) in block_out.iter_mut().zip(block.chunks_exact(queries.dim())) {
                        kernel_column(&self.kernel_x, pivots, x, &mut phi);
                        *o = weights.iter().zip(&phi).map(|(a, b)| a * b).sum();
                    }
                }
            }
        }
        Ok(())
    }
}

/// Low-rank operator together with the factorizations it was built from.
#[derive(Debug, Clone)]
pub struct LowRankCmeFit {
    pub operator: CmeOperator,
    pub factors_x: LowRankFactors,
    pub basis_x: SpectralBasis,
    pub factors_y: LowRankFactors,
    pub basis_y: SpectralBasis,
}

pub fn fit_lowrank_cme(
    x_train: &SampleMatrix,
    y_train: &SampleMatrix,
    kernel_x: &KernelSpec,
    kernel_y: &KernelSpec,
    lambda: f64,
    epsilon: TraceTolerance,
) -> Result<CmeOperator> {
    fit_lowrank_cme_detailed(x_train, y_train, kernel_x, kernel_y, lambda, epsilon).map(|fit| fit.operator)
}

/// Factorizes `K_X` and `K_Y`, rotates both bases and solves the reduced
/// problem in closed form.
pub fn fit_lowrank_cme_detailed(
    x_train: &SampleMatrix,
    y_train: &SampleMatrix,
    kernel_x: &KernelSpec,
    kernel_y: &KernelSpec,
    lambda: f64,
    epsilon: TraceTolerance,
) -> Result<LowRankCmeFit> {
    let n = check_training(x_train, y_train, lambda)?;
    kernel_x.validate()?;
    kernel_y.validate()?;
    let eps = epsilon.value();
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidTolerance(eps));
    }

    let factors_x = pivoted_cholesky_with(&kernel_matrix_source(kernel_x, x_train), epsilon, None)?;
    let factors_y = pivoted_cholesky_with(&kernel_matrix_source(kernel_y, y_train), epsilon, None)?;
    if factors_x.rank() == 0 || factors_y.rank() == 0 {
        return Err(Error::DegenerateSample("tolerance exceeds the kernel matrix trace"));
    }
    let basis_x = spectral_rotation(&factors_x)?;
    let basis_y = spectral_rotation(&factors_y)?;

    let ridge = n as f64 * lambda;
    let cross = factors_y.l().transpose() * factors_x.l();
    let mut f_tilde = basis_y.v().tr_mul(&cross) * basis_x.v();
    for (j, mut col) in f_tilde.column_iter_mut().enumerate() {
        col /= basis_x.eigenvalues()[j] + ridge;
    }

    let record = CmeRecord {
        q_x: basis_x.q_pivot().clone(),
        q_y: basis_y.q_pivot().clone(),
        f_tilde,
        lambda_x: basis_x.eigenvalues().clone(),
        pivot_states_x: x_train.select(factors_x.pivots()),
        pivot_indices_x: factors_x.pivots().to_vec(),
        pivot_indices_y: factors_y.pivots().to_vec(),
        kernel_x: *kernel_x,
        kernel_y: *kernel_y,
        lambda,
        epsilon,
        n,
        summary: TrainingSummary {
            trace_kx: factors_x.trace(),
            trace_ky: factors_y.trace(),
            max_diag_kx: x_train.rows().map(|x| kernel_x.eval_unchecked(x, x)).fold(0.0, f64::max),
            threshold_x: factors_x.tolerance(),
            threshold_y: factors_y.tolerance(),
            residual_x: factors_x.residual_trace(),
            residual_y: factors_y.residual_trace(),
        },
    };
    let operator = CmeOperator::try_from(record)?;
    if operator.fold.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("low-rank CME produced non-finite coefficients".into()));
    }
    Ok(LowRankCmeFit { operator, factors_x, basis_x, factors_y, basis_y })
}

/// `[f(y_1), ..., f(y_n)] Q_Y F~ Q_X^T Phi_X(x)^T` for every query row.
pub fn apply_cme(op: &CmeOperator, f_values: &[f64], queries: &SampleMatrix) -> Result<Vec<f64>> {
    let w = op.weights(f_values)?;
    let mut out = vec![0.0; queries.len()];
    op.evaluate_weights(&w, queries, &mut out)?;
    Ok(out)
}

/// Coefficients of the H-orthogonal projection of the full-rank estimator
/// onto the low-rank space: `(L_Y V_Y)^T F (L_X V_X)`.
pub fn project_full_to_lowrank(
    full: &FullCmeOperator,
    factors_x: (&LowRankFactors, &SpectralBasis),
    factors_y: (&LowRankFactors, &SpectralBasis),
) -> Result<DMatrix<f64>> {
    let n = full.n();
    let (lx, vx) = (factors_x.0.l(), factors_x.1.v());
    let (ly, vy) = (factors_y.0.l(), factors_y.1.v());
    for rows in [lx.nrows(), ly.nrows()] {
        if rows != n {
            return Err(Error::DimensionMismatch { expected: n, found: rows });
        }
    }
    if vx.nrows() != lx.ncols() || vy.nrows() != ly.ncols() {
        return Err(Error::DimensionMismatch { expected: lx.ncols(), found: vx.nrows() });
    }
    let lvx = lx * vx;
    let lvy = ly * vy;
    Ok(lvy.tr_mul(&(full.f() * lvx)))
}

/// `Q_Y C Q_X^T` as an `n x n` coefficient matrix.
pub fn expand_coefficients(
    basis_y: &SpectralBasis,
    coeffs: &DMatrix<f64>,
    basis_x: &SpectralBasis,
) -> Result<DMatrix<f64>> {
    let (qy, qx) = (basis_y.q_dense(), basis_x.q_dense());
    if coeffs.shape() != (qy.ncols(), qx.ncols()) {
        return Err(Error::DimensionMismatch { expected: qy.ncols(), found: coeffs.nrows() });
    }
    Ok(qy * coeffs * qx.transpose())
}

/// Squared H-norm of `Phi_Y (A - B) Phi_X^T`, via
/// `trace((A-B)^T K_Y (A-B) K_X)`.
pub fn hnorm_sq_difference(a: &DMatrix<f64>, b: &DMatrix<f64>, kx: &DMatrix<f64>, ky: &DMatrix<f64>) -> Result<f64> {
    let n = kx.nrows();
    for shape in [a.shape(), b.shape(), kx.shape(), ky.shape()] {
        if shape != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: shape.0.max(shape.1) });
        }
    }
    let d = a - b;
    let left = ky * &d;
    let right = &d * kx;
    Ok(left.dot(&right).max(0.0))
}

/// Upper estimate `n / (n lambda)^2` of `||F||_F^2`, from the eigenvalues of
/// `F` lying in `(0, 1/(n lambda)]`.
pub fn frob_f_sq_upper(n: usize, lambda: f64) -> f64 {
    let nl = n as f64 * lambda;
    n as f64 / (nl * nl)
}

/// Explicit bound on `||mu^ - mu~||_H^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankErrorBound {
    pub delta_lr: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub n: usize,
    pub trace_kx: f64,
    pub trace_ky: f64,
    pub frob_f_sq: f64,
}

pub fn lowrank_error_bound(
    epsilon: f64,
    lambda: f64,
    n: usize,
    trace_kx: f64,
    trace_ky: f64,
    frob_f_sq: f64,
) -> Result<LowRankErrorBound> {
    for (name, v) in [("epsilon", epsilon), ("trace_kx", trace_kx), ("trace_ky", trace_ky), ("frob_f_sq", frob_f_sq)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")));
        }
    }
    if !(lambda > 0.0) || n == 0 {
        return Err(Error::InvalidInput("lambda and n must be positive".into()));
    }
    let nl = n as f64 * lambda;
    let delta_lr = epsilon * frob_f_sq * (trace_kx + trace_ky) + epsilon * epsilon / nl.powi(4) * trace_kx * trace_ky;
    Ok(LowRankErrorBound { delta_lr, epsilon, lambda, n, trace_kx, trace_ky, frob_f_sq })
}
