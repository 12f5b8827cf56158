use std::path::PathBuf;

use kcme::market::{experiment_seed, HestonParams};
use kcme::pricing::PricingMethod;
use kcme_bench::aggregate::{aggregate_iv_error, normal_interval, timing_summary, Z_95};
use kcme_bench::config::{parse_fraction, ExperimentConfig, LambdaRule};
use kcme_bench::grid::{cells, moneyness_grid, run_grid, strike_grid, ResultRow};
use kcme_bench::output::{write_error_files, write_rank_files, write_rows, write_timing_files};
use kcme_bench::rank::{rank_records_from_rows, rank_summary, RankRecord};
use kcme_bench::reference::{reference_prices_r0_lane, ReferenceEntry, ReferenceTable};
use kcme_bench::BenchError;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kcme-harness-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        n_grid: vec![200],
        maturities: vec![0.5],
        moneyness_count: 2,
        replications: 1,
        threads: 1,
        reference_paths: 20_000,
        ..ExperimentConfig::default()
    }
}

#[test]
fn strike_grid_end_points() {
    let k = strike_grid(100.0, 0.04, 1.0, 10).unwrap();
    assert_eq!(k.len(), 10);
    assert!((k[0] - 67.032_004_603_563_9).abs() < 1e-9, "{}", k[0]);
    assert!((k[9] - 149.182_469_764_127).abs() < 1e-9, "{}", k[9]);
    assert!(k[4] < 100.0 && 100.0 < k[5]);
    assert!(k.windows(2).all(|w| w[0] < w[1]));
    let m = moneyness_grid(10).unwrap();
    assert_eq!((m[0], m[9]), (-2.0, 2.0));
    assert!(matches!(strike_grid(100.0, 0.04, 1.0, 1), Err(BenchError::InvalidCount(1))));
}

#[test]
fn config_file_parsing() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(
        "# desk run\n\
         n_grid = 100, 1e3\n\
         maturities = 1/12, 0.5\n\
         replications = 3   # trailing comment\n\
         methods = ls\n\
         lambda_rule = n^{-1/2}\n\
         r = 0.01\n",
    )
    .unwrap();
    assert_eq!(cfg.n_grid, vec![100, 1000]);
    assert!((cfg.maturities[0] - 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(cfg.replications, 3);
    assert_eq!(cfg.methods, vec![PricingMethod::Ls]);
    assert_eq!(cfg.lambda_rule, LambdaRule::InverseSqrtN);
    assert_eq!(cfg.heston.r, 0.01);
    assert_eq!(cfg.lambda_rule.lambda(10_000), 0.01);

    let err = ExperimentConfig::default().apply_text("n_grid = 100\nbogus = 1\n").unwrap_err();
    assert!(matches!(err, BenchError::Config { line: 2, .. }), "{err}");
    let err = ExperimentConfig::default().apply_text("epsilon\n").unwrap_err();
    assert!(matches!(err, BenchError::Config { line: 1, .. }));
    assert!(matches!(ExperimentConfig::default().apply_text("moneyness_count = 1"), Err(BenchError::InvalidCount(1))));
    assert!(matches!(ExperimentConfig::default().apply_text("epsilon = 0"), Err(BenchError::InvalidConfig(_))));
    assert!(matches!(
        ExperimentConfig::default().apply_text("methods = cme_lr,binomial"),
        Err(BenchError::InvalidConfig(_))
    ));
    assert!(ExperimentConfig::default().apply_text("n_grid = 1,2,3,4,5").is_err());
    assert!("n^2".parse::<LambdaRule>().is_err());
    assert_eq!(parse_fraction("1/4").unwrap(), 0.25);
    assert!(parse_fraction("one").is_err());
}

#[test]
fn output_dir_precedence() {
    let mut cfg = ExperimentConfig::default();
    let flag = PathBuf::from("from-flag");
    std::env::remove_var(kcme_bench::config::OUTPUT_DIR_ENV);
    assert_eq!(cfg.resolve_output_dir(None), PathBuf::from(kcme_bench::config::DEFAULT_OUTPUT_DIR));
    cfg.output_dir = Some("from-file".into());
    assert_eq!(cfg.resolve_output_dir(None), PathBuf::from("from-file"));
    std::env::set_var(kcme_bench::config::OUTPUT_DIR_ENV, "from-env");
    assert_eq!(cfg.resolve_output_dir(None), PathBuf::from("from-env"));
    assert_eq!(cfg.resolve_output_dir(Some(&flag)), flag);
    std::env::remove_var(kcme_bench::config::OUTPUT_DIR_ENV);
}

#[test]
fn one_cell_two_strikes_two_methods() {
    let cfg = tiny_config();
    let out = run_grid(&cfg, |_| {}).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.rows.len(), 4);
    let methods: Vec<_> = out.rows.iter().map(|r| r.method).collect();
    assert_eq!(methods, vec![PricingMethod::CmeLr, PricingMethod::Ls, PricingMethod::CmeLr, PricingMethod::Ls]);
    let seed = experiment_seed(0, 0, 0).unwrap();
    for r in &out.rows {
        assert_eq!(r.seed, seed);
        assert!(r.price.is_finite() && r.price >= 0.0);
        assert!(r.elapsed_micros > 0.0);
        assert_eq!(r.rank_x.is_some(), r.method == PricingMethod::CmeLr);
        assert_eq!(r.bound_lr_part.is_some(), r.method == PricingMethod::CmeLr);
        assert_eq!(r.valid, r.implied_vol.is_some());
        assert!((r.log_moneyness - (r.strike / 100.0).ln()).abs() < 1e-15);
    }
}

fn strip_timing(rows: &[ResultRow]) -> Vec<ResultRow> {
    rows.iter().cloned().map(|r| ResultRow { elapsed_micros: 0.0, ..r }).collect()
}

#[test]
fn grid_is_deterministic_across_runs_and_threads() {
    let cfg = ExperimentConfig { n_grid: vec![100, 150], replications: 2, moneyness_count: 3, ..tiny_config() };
    let a = run_grid(&cfg, |_| {}).unwrap();
    let b = run_grid(&cfg, |_| {}).unwrap();
    let c = run_grid(&ExperimentConfig { threads: 3, ..cfg.clone() }, |_| {}).unwrap();
    assert_eq!(a.rows.len(), 2 * 2 * 2 * 3);
    assert_eq!(strip_timing(&a.rows), strip_timing(&b.rows));
    assert_eq!(strip_timing(&a.rows), strip_timing(&c.rows));
    let prices = |rows: &[ResultRow]| rows.iter().map(|r| r.price.to_bits()).collect::<Vec<_>>();
    assert_eq!(prices(&a.rows), prices(&c.rows));
}

#[test]
fn streamed_rows_match_the_outcome() {
    let cfg = ExperimentConfig { replications: 2, ..tiny_config() };
    let seen = std::sync::Mutex::new(Vec::new());
    let out = run_grid(&cfg, |r| seen.lock().unwrap().push(r.price.to_bits())).unwrap();
    let mut seen = seen.into_inner().unwrap();
    let mut all: Vec<u64> = out.rows.iter().map(|r| r.price.to_bits()).collect();
    seen.sort();
    all.sort();
    assert_eq!(seen, all);
    assert_eq!(cells(&cfg).unwrap().len(), 2);
}

fn row(method: PricingMethod, rep: usize, strike: f64, iv: Option<f64>) -> ResultRow {
    ResultRow {
        method,
        n: 100,
        maturity: 1.0,
        strike,
        log_moneyness: (strike / 100.0).ln(),
        rep,
        price: 1.0,
        implied_vol: iv,
        rel_iv_error: None,
        elapsed_micros: 10f64.powi(rep as i32 + 2),
        rank_x: Some(3),
        rank_y: Some(40 + rep),
        seed: rep as u64,
        valid: iv.is_some(),
        bound_lr_part: None,
        ridge_fallback: false,
    }
}

fn reference(entries: &[(f64, Option<f64>)]) -> ReferenceTable {
    ReferenceTable {
        entries: entries
            .iter()
            .map(|&(strike, iv)| ReferenceEntry {
                maturity: 1.0,
                strike,
                price: None,
                std_error: None,
                implied_vol: iv,
                iv_std_error: None,
            })
            .collect(),
    }
}

#[test]
fn single_row_error() {
    let refs = reference(&[(100.0, Some(0.20))]);
    let s = aggregate_iv_error(&[row(PricingMethod::CmeLr, 0, 100.0, Some(0.22))], &refs).unwrap();
    assert_eq!(s.by_cell.len(), 1);
    assert!((s.by_cell[0].mean - 0.1).abs() < 1e-12);
    assert_eq!(s.by_cell[0].lo, s.by_cell[0].mean);

    let mut r = row(PricingMethod::Ls, 0, 100.0, Some(0.22));
    r.attach_reference(&refs).unwrap();
    assert!((r.rel_iv_error.unwrap() - 0.1).abs() < 1e-12);

    let exact = aggregate_iv_error(&[row(PricingMethod::Ls, 0, 100.0, Some(0.20))], &refs).unwrap();
    assert_eq!(exact.by_cell[0].mean, 0.0);
}

#[test]
fn three_row_fixture_by_hand() {
    // Errors: rep 0 -> {0.10, 0.05}, rep 1 -> {0.05}.
    let refs = reference(&[(90.0, Some(0.20)), (110.0, Some(0.20))]);
    let rows = [
        row(PricingMethod::CmeLr, 0, 90.0, Some(0.22)),
        row(PricingMethod::CmeLr, 0, 110.0, Some(0.19)),
        row(PricingMethod::CmeLr, 1, 90.0, Some(0.21)),
    ];
    let s = aggregate_iv_error(&rows, &refs).unwrap();
    let c = &s.by_cell[0];
    assert!((c.mean - 0.2 / 3.0).abs() < 1e-12);
    // Replication means 0.075 and 0.05: sd 0.025/sqrt(2), half-width 1.96 * 0.0125.
    let half = 1.96 * 0.0125;
    assert!((c.hi - c.mean - half).abs() < 1e-12 && (c.mean - c.lo - half).abs() < 1e-12);
    assert_eq!((c.rows_used, c.rows_excluded, c.reps), (3, 0, 2));
    assert_eq!(s.by_moneyness.len(), 2);
    let low = &s.by_moneyness[0];
    assert_eq!(low.strike, 90.0);
    assert!((low.error.mean - 0.075).abs() < 1e-12);
}

#[test]
fn invalid_rows_are_excluded_and_counted() {
    let refs = reference(&[(90.0, Some(0.20)), (110.0, None)]);
    let rows = [
        row(PricingMethod::Ls, 0, 90.0, None),
        row(PricingMethod::Ls, 0, 110.0, Some(0.2)),
        row(PricingMethod::Ls, 1, 90.0, Some(0.3)),
    ];
    let s = aggregate_iv_error(&rows, &refs).unwrap();
    assert_eq!((s.by_cell[0].rows_used, s.by_cell[0].rows_excluded), (1, 2));
    assert!((s.by_cell[0].mean - 0.5).abs() < 1e-12);

    let missing = aggregate_iv_error(&[row(PricingMethod::Ls, 0, 95.0, Some(0.2))], &refs);
    assert!(matches!(missing, Err(BenchError::MissingReference { .. })));
}

#[test]
fn interval_and_timing_statistics() {
    assert!(normal_interval(&[]).is_none());
    let i = normal_interval(&[1.0, 3.0]).unwrap();
    assert_eq!(i.mean, 2.0);
    assert!((i.hi - 2.0 - Z_95).abs() < 1e-12);
    let rows = [row(PricingMethod::Ls, 0, 90.0, None), row(PricingMethod::Ls, 1, 90.0, None)];
    let t = timing_summary(&rows);
    assert_eq!(t.len(), 1);
    assert!((t[0].log10_time.mean - 2.5).abs() < 1e-12);
}

#[test]
fn rank_statistics() {
    assert!(matches!(rank_summary(&[]), Err(BenchError::EmptyInput(_))));
    let one = RankRecord { n: 1000, maturity: 1.0, epsilon: 1e-5, rep: 0, rank_x: 3, rank_y: 137 };
    let s = rank_summary(&[one]).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!((s[0].mean_rank_y, s[0].mean_rank_x, s[0].reps), (137.0, 3.0, 1));

    let rows = [
        row(PricingMethod::CmeLr, 0, 90.0, None),
        row(PricingMethod::CmeLr, 0, 110.0, None),
        row(PricingMethod::Ls, 0, 90.0, None),
        row(PricingMethod::CmeLr, 1, 90.0, None),
    ];
    let records = rank_records_from_rows(&rows, 1e-5);
    assert_eq!(records.len(), 2);
    let s = rank_summary(&records).unwrap();
    assert_eq!(s[0].mean_rank_y, 40.5);
    assert_eq!((s[0].min_rank_x, s[0].max_rank_x), (3, 3));
}

#[test]
fn reference_needs_zero_rate() {
    let mut cfg = tiny_config();
    cfg.heston.r = 0.03;
    assert!(matches!(reference_prices_r0_lane(&cfg, 1000, 0), Err(BenchError::NotApplicable(_))));
}

#[test]
fn reference_at_the_money_is_inside_the_no_arbitrage_band() {
    let cfg = ExperimentConfig { moneyness_count: 3, maturities: vec![1.0], ..tiny_config() };
    let table = reference_prices_r0_lane(&cfg, 50_000, 0).unwrap();
    let atm = table.entry(1.0, 100.0).expect("m = 0 gives K = s0");
    let price = atm.price.unwrap();
    assert!(price > 0.0 && price < 100.0);
    assert!(atm.implied_vol.is_some() && atm.iv_std_error.unwrap() > 0.0);
}

#[test]
fn deep_out_of_the_money_reference() {
    let cfg = ExperimentConfig {
        heston: HestonParams { v0: 0.25, ..HestonParams::default() },
        maturities: vec![2.0],
        moneyness_count: 2,
        ..tiny_config()
    };
    let table = reference_prices_r0_lane(&cfg, 5_000, 0).unwrap();
    let low = &table.entries[0];
    assert!(low.strike < 30.0);
    assert!(low.price.unwrap() >= 0.0);
    match low.implied_vol {
        Some(iv) => assert!(iv > 0.0 && iv.is_finite()),
        None => assert!(low.iv_std_error.is_none()),
    }
}

#[test]
fn reference_is_self_consistent_when_doubling_paths() {
    let cfg = ExperimentConfig { moneyness_count: 5, maturities: vec![0.5, 1.0], ..tiny_config() };
    let a = reference_prices_r0_lane(&cfg, 100_000, 1).unwrap();
    let b = reference_prices_r0_lane(&cfg, 200_000, 2).unwrap();
    for (x, y) in a.entries.iter().zip(&b.entries) {
        let (Some(ix), Some(iy)) = (x.implied_vol, y.implied_vol) else { continue };
        let tol = 3.0 * x.iv_std_error.unwrap().hypot(y.iv_std_error.unwrap());
        assert!((ix - iy).abs() <= tol, "K={} {ix} {iy} tol {tol}", x.strike);
    }
}

#[test]
fn reference_round_trips_through_csv() {
    let dir = scratch("reference");
    let cfg = ExperimentConfig { moneyness_count: 3, ..tiny_config() };
    let table = reference_prices_r0_lane(&cfg, 2_000, 0).unwrap();
    let path = dir.join("reference.csv");
    table.write_csv(&path).unwrap();
    assert_eq!(ReferenceTable::read_csv(&path).unwrap(), table);
    let minimal = dir.join("minimal.csv");
    std::fs::write(&minimal, "T,strike,implied_vol\n1,100,0.2\n").unwrap();
    assert_eq!(ReferenceTable::read_csv(&minimal).unwrap().implied_vol(1.0, 100.0).unwrap(), 0.2);
    std::fs::remove_dir_all(&dir).unwrap();
}

fn first_line(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn csv_headers() {
    let dir = scratch("headers");
    let cfg = ExperimentConfig { n_grid: vec![100, 150], ..tiny_config() };
    let out = run_grid(&cfg, |_| {}).unwrap();
    let table = reference_prices_r0_lane(&cfg, 2_000, 0).unwrap();
    let mut rows = out.rows.clone();
    for r in &mut rows {
        r.attach_reference(&table).unwrap();
    }
    write_rows(&dir.join("rows.csv"), &rows).unwrap();
    let t = write_timing_files(&dir, &cfg, &timing_summary(&rows)).unwrap();
    let e = write_error_files(&dir, &cfg, &aggregate_iv_error(&rows, &table).unwrap()).unwrap();
    let records = rank_records_from_rows(&rows, cfg.epsilon);
    let r = write_rank_files(&dir, &cfg.maturities, &rank_summary(&records).unwrap()).unwrap();
    assert_eq!(t, vec![dir.join("winner_time_T1.csv")]);
    assert_eq!(
        e,
        vec![
            dir.join("winner_err_T1.csv"),
            dir.join("error_mk_winner_T1_N1.csv"),
            dir.join("error_mk_winner_T1_N2.csv")
        ]
    );
    assert_eq!(
        first_line(&t[0]),
        "N,mean_logtime_poly,lo_logtime_poly,hi_logtime_poly,mean_logtime_cme,lo_logtime_cme,hi_logtime_cme"
    );
    assert_eq!(first_line(&e[0]), "N,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme");
    assert_eq!(first_line(&e[1]), "logmoneyness,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme");
    assert_eq!(first_line(&r[0]), "N,epsilon,mean_rank_x,mean_rank_y,lo_rank_y,hi_rank_y,min_rank_x,max_rank_x,reps");
    assert_eq!(
        first_line(&dir.join("rows.csv")),
        "method,n,T,strike,log_moneyness,rep,price,implied_vol,rel_iv_error,elapsed_micros,rank_x,rank_y,seed,valid,\
         bound_lr_part,ridge_fallback"
    );
    // One data row per N in the timing and error files, one per strike in the moneyness files.
    assert_eq!(std::fs::read_to_string(&t[0]).unwrap().lines().count(), 3);
    assert_eq!(std::fs::read_to_string(&e[1]).unwrap().lines().count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}
