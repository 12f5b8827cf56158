//! Longstaff–Schwartz regression on a bivariate polynomial basis.

use nalgebra::{DMatrix, DVector};

use super::{mean_and_stderr, ContractSpec, PricingMethod, PricingResult};
use crate::error::{Error, Result};
use crate::market::PathSet;

/// Diagonal added to the normal equations when they are not positive definite.
pub const LS_RIDGE: f64 = 1e-10;

fn basis_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for j in 0..=total {
            out.push((total - j, j));
        }
    }
    out
}

/// Affine map to zero mean and unit spread. A coordinate whose spread is at
/// rounding level maps to exactly zero, so its monomials drop out cleanly.
#[derive(Clone, Copy)]
struct Standardizer {
    mean: f64,
    scale: f64,
}

impl Standardizer {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let degenerate = !(sd > 1e-12 * mean.abs().max(1e-300)) || !sd.is_finite();
        Standardizer { mean, scale: if degenerate { 0.0 } else { 1.0 / sd } }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.mean) * self.scale
    }
}

struct Basis {
    exps: Vec<(usize, usize)>,
    degree: usize,
    pu: Vec<f64>,
    pv: Vec<f64>,
}

impl Basis {
    fn new(degree: usize) -> Self {
        Basis { exps: basis_exponents(degree), degree, pu: vec![1.0; degree + 1], pv: vec![1.0; degree + 1] }
    }

    fn fill(&mut self, u: f64, v: f64, out: &mut [f64]) {
        for d in 1..=self.degree {
            self.pu[d] = self.pu[d - 1] * u;
            self.pv[d] = self.pv[d - 1] * v;
        }
        for (o, &(i, j)) in out.iter_mut().zip(&self.exps) {
            *o = self.pu[i] * self.pv[j];
        }
    }
}

/// Regresses realized discounted cash flows of in-the-money paths on all
/// monomials of total degree `<= degree` in standardized `(log S, v)`, and
/// exercises wherever the payoff is at least the fitted continuation.
pub fn price_american_ls(paths: &PathSet, contract: &ContractSpec, degree: usize) -> Result<PricingResult> {
    if degree == 0 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    contract.check_paths(paths)?;
    let start = web_time::Instant::now();
    let n = paths.n_paths();
    let nt = paths.n_steps();
    let mut basis = Basis::new(degree);
    let m = basis.exps.len();
    let mut cash = vec![0.0; n];
    contract.discounted_payoffs(paths, nt, &mut cash);
    let mut payoff = vec![0.0; n];
    let mut phi = vec![0.0; m];
    let mut ridge_fallback = false;

    for k in (1..nt).rev() {
        contract.discounted_payoffs(paths, k, &mut payoff);
        let itm: Vec<usize> = (0..n).filter(|&i| payoff[i] > 0.0).collect();
        if itm.is_empty() {
            continue;
        }
        let (lp, var) = (paths.log_prices_at(k), paths.variances_at(k));
        let su = Standardizer::fit(itm.iter().map(|&i| lp[i]));
        let sv = Standardizer::fit(itm.iter().map(|&i| var[i]));

        let mut gram = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for &i in &itm {
            basis.fill(su.apply(lp[i]), sv.apply(var[i]), &mut phi);
            for c in 0..m {
                let pc = phi[c];
                rhs[c] += pc * cash[i];
                let col = &mut gram.as_mut_slice()[c * m..c * m + c + 1];
                for (g, &pr) in col.iter_mut().zip(&phi[..=c]) {
                    *g += pr * pc;
                }
            }
        }
        gram.fill_lower_triangle_with_upper_triangle();
        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                ridge_fallback = true;
                for d in 0..m {
                    gram[(d, d)] += LS_RIDGE;
                }
                gram.cholesky().ok_or(Error::SingularSystem)?.solve(&rhs)
            }
        };
        for &i in &itm {
            basis.fill(su.apply(lp[i]), sv.apply(var[i]), &mut phi);
            let cont: f64 = beta.iter().zip(&phi).map(|(b, p)| b * p).sum();
            if payoff[i] >= cont {
                cash[i] = payoff[i];
            }
        }
    }
    let (mean, se) = mean_and_stderr(&cash);
    Ok(PricingResult {
        price: contract.initial_payoff(paths).max(mean).max(0.0),
        method: PricingMethod::Ls,
        elapsed_micros: start.elapsed().as_secs_f64() * 1e6,
        rank_x: None,
        rank_y: None,
        n_paths: n,
        seed: Some(paths.seed()),
        std_error: Some(se),
        ridge_fallback,
    })
}
