use kcme::market::{simulate_heston, HestonParams, PathSet, VARIANCE_FLOOR};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn discounted_terminal(paths: &PathSet, r: f64) -> Vec<f64> {
    let t = paths.maturity();
    paths.log_prices_at(paths.n_steps()).iter().map(|l| (l - r * t).exp()).collect()
}

#[test]
fn zero_rate_price_is_a_martingale() {
    let p = HestonParams::default();
    let paths = simulate_heston(&p, 100_000, 1.0, 2024).unwrap();
    let (m, se) = mean_and_se(&discounted_terminal(&paths, 0.0));
    assert!((m - p.s0).abs() <= 4.0 * se, "mean {m} se {se}");
}

#[test]
fn positive_rate_discounted_price_is_a_martingale() {
    let p = HestonParams { r: 0.05, ..HestonParams::default() };
    let paths = simulate_heston(&p, 100_000, 2.0, 77).unwrap();
    let (m, se) = mean_and_se(&discounted_terminal(&paths, p.r));
    assert!((m - p.s0).abs() <= 4.0 * se, "mean {m} se {se}");
}

#[test]
fn increments_carry_the_stated_correlation() {
    let p = HestonParams::default();
    let paths = simulate_heston(&p, 100_000, 1.0, 5).unwrap();
    let dt = paths.dt();
    for k in [0, 10, 40] {
        let (l0, l1) = (paths.log_prices_at(k), paths.log_prices_at(k + 1));
        let (v0, v1) = (paths.variances_at(k), paths.variances_at(k + 1));
        let mut a = Vec::with_capacity(l0.len());
        let mut b = Vec::with_capacity(l0.len());
        for i in 0..l0.len() {
            let vp = v0[i].max(0.0);
            a.push(l1[i] - l0[i] - (p.r - 0.5 * vp) * dt);
            b.push(v1[i] - v0[i] - p.kappa * (p.theta - vp) * dt);
        }
        let (ma, _) = mean_and_se(&a);
        let (mb, _) = mean_and_se(&b);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!((corr - p.rho).abs() < 0.02, "step {k}: {corr}");
    }
}

#[test]
fn floor_holds_under_violent_vol_of_vol() {
    let p = HestonParams { xi: 1.5, kappa: 0.5, ..HestonParams::default() };
    let paths = simulate_heston(&p, 5_000, 1.0, 3).unwrap();
    let min = paths.variances().iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= VARIANCE_FLOOR);
    assert_eq!(min, VARIANCE_FLOOR);
}

#[test]
fn constant_volatility_log_returns_are_gaussian() {
    let p = HestonParams::black_scholes(100.0, 0.2, 0.03);
    let paths = simulate_heston(&p, 50_000, 1.0, 11).unwrap();
    let lr: Vec<f64> = paths.log_prices_at(52).iter().map(|l| l - 100f64.ln()).collect();
    let (m, se) = mean_and_se(&lr);
    assert!((m - (0.03 - 0.02)).abs() < 4.0 * se, "{m}");
    let var = lr.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (lr.len() - 1) as f64;
    // sd of the sample variance is about var * sqrt(2 / n).
    assert!((var - 0.04).abs() < 4.0 * 0.04 * (2.0 / 50_000f64).sqrt(), "{var}");
}
