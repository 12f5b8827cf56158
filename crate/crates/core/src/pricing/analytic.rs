//! Black–Scholes put, implied volatility and a CRR tree.

use roots::{find_root_brent, Convergency};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Search interval for implied volatility.
pub const IV_BRACKET: (f64, f64) = (1e-4, 5.0);
pub const IV_TOLERANCE: f64 = 1e-10;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub fn black_scholes_put(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    check_positive("s", s)?;
    check_positive("k", k)?;
    if !(sigma >= 0.0) || !(t >= 0.0) || !r.is_finite() || !sigma.is_finite() || !t.is_finite() {
        return Err(Error::InvalidInput("sigma and T must be nonnegative and finite".into()));
    }
    let dk = k * (-r * t).exp();
    if sigma == 0.0 || t == 0.0 {
        return Ok((dk - s).max(0.0));
    }
    let vol = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    Ok((dk * normal_cdf(-d2) - s * normal_cdf(-d1)).max(0.0))
}

struct BracketWidth(f64);

impl Convergency<f64> for BracketWidth {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.0
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= 500
    }
}

/// Volatility at which the Black–Scholes put matches `price`.
pub fn implied_vol_put(price: f64, s: f64, k: f64, r: f64, t: f64) -> Result<f64> {
    check_positive("s", s)?;
    check_positive("k", k)?;
    check_positive("T", t)?;
    let upper = k * (-r * t).exp();
    let lower = (upper - s).max(0.0);
    if !(price > lower && price < upper) {
        return Err(Error::PriceOutOfBounds { price, lower, upper });
    }
    let (lo, hi) = IV_BRACKET;
    let f = |sigma: f64| black_scholes_put(s, k, r, sigma, t).map(|p| p - price).unwrap_or(f64::NAN);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::PriceOutOfBounds { price, lower: price + f_lo, upper: price + f_hi });
    }
    find_root_brent(lo, hi, f, &mut BracketWidth(IV_TOLERANCE))
        .map_err(|e| Error::InvalidInput(format!("implied volatility search failed: {e}")))
}

fn crr_put(s: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize, american: bool) -> Result<f64> {
    check_positive("s", s)?;
    check_positive("k", k)?;
    check_positive("sigma", sigma)?;
    check_positive("T", t)?;
    if steps == 0 || !r.is_finite() {
        return Err(Error::InvalidInput("steps must be at least 1 and r finite".into()));
    }
    let dt = t / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (r * dt).exp();
    let p = (growth - d) / (u - d);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("tree step too coarse: risk-neutral probability {p}")));
    }
    let disc = 1.0 / growth;
    // Node j at level i has price s u^j d^(i-j).
    let mut values: Vec<f64> =
        (0..=steps).map(|j| (k - s * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0)).collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = if american { cont.max(k - s * u.powi(j as i32) * d.powi((i - j) as i32)) } else { cont };
        }
    }
    Ok(values[0])
}

/// Cox–Ross–Rubinstein tree with early exercise at every node.
pub fn binomial_american_put(s: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize) -> Result<f64> {
    crr_put(s, k, r, sigma, t, steps, true)
}

pub fn binomial_european_put(s: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize) -> Result<f64> {
    crr_put(s, k, r, sigma, t, steps, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_black_scholes() {
        assert_eq!(black_scholes_put(100.0, 90.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(black_scholes_put(80.0, 100.0, 0.0, 0.3, 0.0).unwrap(), 20.0);
        assert!(black_scholes_put(-1.0, 100.0, 0.0, 0.2, 1.0).is_err());
        assert!(black_scholes_put(100.0, 100.0, 0.0, -0.2, 1.0).is_err());
    }

    #[test]
    fn at_the_money_reference_value() {
        // 100 (2 Phi(0.1) - 1), evaluated at 50 digits.
        let p = black_scholes_put(100.0, 100.0, 0.0, 0.2, 1.0).unwrap();
        assert!((p - 7.965_567_455_405_796).abs() < 1e-10, "{p}");
    }

    #[test]
    fn put_call_parity_shape() {
        // P - (K e^{-rT} - S) equals the call, which is increasing in S.
        let k = 100.0;
        let (r, t, sig) = (0.05, 0.75, 0.3);
        let call = |s: f64| black_scholes_put(s, k, r, sig, t).unwrap() - (k * (-r * t).exp() - s);
        assert!(call(90.0) < call(100.0) && call(100.0) < call(110.0));
        assert!(call(50.0) >= 0.0);
    }

    #[test]
    fn implied_vol_round_trip() {
        let p = black_scholes_put(100.0, 100.0, 0.0, 0.2, 1.0).unwrap();
        let iv = implied_vol_put(p, 100.0, 100.0, 0.0, 1.0).unwrap();
        assert!((iv - 0.2).abs() < 1e-9, "{iv}");
        for (s, k, r, sig, t) in
            [(100.0, 70.0, 0.0, 0.35, 0.5), (90.0, 120.0, 0.03, 0.15, 2.0), (100.0, 100.0, 0.0, 1.7, 1.0)]
        {
            let p = black_scholes_put(s, k, r, sig, t).unwrap();
            let iv = implied_vol_put(p, s, k, r, t).unwrap();
            assert!((iv - sig).abs() < 1e-8, "{iv} vs {sig}");
        }
    }

    #[test]
    fn implied_vol_bounds() {
        assert!(matches!(implied_vol_put(0.0, 100.0, 100.0, 0.0, 1.0), Err(Error::PriceOutOfBounds { .. })));
        assert!(matches!(implied_vol_put(20.0, 80.0, 100.0, 0.0, 1.0), Err(Error::PriceOutOfBounds { .. })));
        assert!(matches!(implied_vol_put(100.0, 100.0, 100.0, 0.0, 1.0), Err(Error::PriceOutOfBounds { .. })));
        let upper = 100.0 * (-0.05f64).exp();
        assert!(implied_vol_put(upper, 100.0, 100.0, 0.05, 1.0).is_err());
        // Above intrinsic but below the price at sigma = 1e-4, about 0.004.
        assert!(matches!(implied_vol_put(1e-3, 100.0, 100.0, 0.0, 1.0), Err(Error::PriceOutOfBounds { .. })));
    }

    #[test]
    fn tree_tiny_maturity_is_intrinsic() {
        let v = binomial_american_put(90.0, 100.0, 0.05, 0.2, 1e-10, 1).unwrap();
        assert!((v - 10.0).abs() < 1e-6);
        let v = binomial_american_put(110.0, 100.0, 0.05, 0.2, 1e-10, 1).unwrap();
        assert!(v.abs() < 1e-6);
    }

    #[test]
    fn tree_zero_rate_has_no_early_exercise_premium() {
        for s in [80.0, 100.0, 120.0] {
            let a = binomial_american_put(s, 100.0, 0.0, 0.25, 1.0, 400).unwrap();
            let e = binomial_european_put(s, 100.0, 0.0, 0.25, 1.0, 400).unwrap();
            assert!((a - e).abs() < 1e-12, "{a} {e}");
        }
    }

    #[test]
    fn tree_converges_to_black_scholes_for_european() {
        let e = binomial_european_put(100.0, 100.0, 0.06, 0.2, 1.0, 2000).unwrap();
        let bs = black_scholes_put(100.0, 100.0, 0.06, 0.2, 1.0).unwrap();
        assert!((e - bs).abs() < 5e-3, "{e} {bs}");
    }

    #[test]
    fn tree_self_convergence() {
        let v: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&n| binomial_american_put(100.0, 100.0, 0.06, 0.2, 1.0, n).unwrap())
            .collect();
        assert!((v[0] - v[1]).abs() < 0.01 && (v[1] - v[2]).abs() < 0.01, "{v:?}");
        let e = binomial_european_put(100.0, 100.0, 0.06, 0.2, 1.0, 2000).unwrap();
        assert!(v[2] > e);
    }

    #[test]
    fn tree_rejects_bad_input() {
        assert!(binomial_american_put(100.0, 100.0, 0.0, 0.2, 1.0, 0).is_err());
        assert!(binomial_american_put(100.0, 100.0, 0.0, 0.0, 1.0, 10).is_err());
        // r dt large enough that the risk-neutral probability leaves [0, 1].
        assert!(binomial_american_put(100.0, 100.0, 5.0, 0.01, 1.0, 1).is_err());
    }
}
