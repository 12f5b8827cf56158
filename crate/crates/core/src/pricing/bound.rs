//! Computable part of the backward error bound.

use serde::{Deserialize, Serialize};

use crate::cme::{frob_f_sq_upper, lowrank_error_bound, CmeOperator, LowRankErrorBound};
use crate::error::Result;

pub const STATISTICAL_PART: &str = "not computable (unknown constants)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardBoundReport {
    pub n_t: usize,
    pub delta_lr: LowRankErrorBound,
    /// Max of `sqrt(k_X(x, x))` over the training inputs; the polynomial
    /// kernel is unbounded, so this is an empirical stand-in for the supremum.
    pub kappa_x_empirical: f64,
    /// `2 n_T kappa_X sqrt(delta_lr)`.
    pub bound_lr_part: f64,
    /// `delta_lr` used `n / (n lambda)^2` in place of `||F||_F^2`.
    pub frob_f_sq_is_upper_estimate: bool,
    pub statistical_part: String,
}

impl BackwardBoundReport {
    pub fn compose(n_t: usize, delta_lr: LowRankErrorBound, kappa_x: f64, frob_upper: bool) -> Self {
        BackwardBoundReport {
            n_t,
            bound_lr_part: 2.0 * n_t as f64 * kappa_x * delta_lr.delta_lr.sqrt(),
            delta_lr,
            kappa_x_empirical: kappa_x,
            frob_f_sq_is_upper_estimate: frob_upper,
            statistical_part: STATISTICAL_PART.to_string(),
        }
    }
}

/// Uses the larger of the two realized residual traces as the factorization
/// tolerance, so an exact factorization yields a zero bound.
pub fn backward_bound_report(op: &CmeOperator, n_t: usize) -> Result<BackwardBoundReport> {
    let s = op.summary();
    let eps = s.residual_x.max(s.residual_y).max(0.0);
    let delta =
        lowrank_error_bound(eps, op.lambda(), op.n(), s.trace_kx, s.trace_ky, frob_f_sq_upper(op.n(), op.lambda()))?;
    Ok(BackwardBoundReport::compose(n_t, delta, s.max_diag_kx.sqrt(), true))
}
