use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand};
use kcme::cme::CmeOperator;
use kcme::market::{read_path_set, simulate_heston, write_path_set, PathSet};
use kcme::pricing::{
    backward_bound_report, binomial_american_put, european_put_mc, price_american_cme_detailed, price_american_ls,
    price_with_operator, CmeSettings, ContractSpec, PricingMethod, PricingResult, ResponseState,
};
use kcme_bench::aggregate::{aggregate_iv_error, timing_summary};
use kcme_bench::config::{parse_fraction, OUTPUT_DIR_ENV};
use kcme_bench::converge::{converge_summary, run_converge, ConvergeConfig};
use kcme_bench::grid::{run_grid, ResultRow};
use kcme_bench::output::{write_converge, write_error_files, write_rank_files, write_rows, write_timing_files};
use kcme_bench::rank::{rank_records_from_rows, rank_study, rank_summary};
use kcme_bench::reference::{reference_prices_r0, ReferenceTable};
use kcme_bench::{BenchError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "kcme", version, about = "Low-rank kernel CME pricing of American puts under Heston")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Heston paths and dump them to a path file.
    Simulate(SimulateArgs),
    /// Price a single contract with each method on one path set.
    Price(PriceArgs),
    /// Run the replication grid and write every CSV dataset.
    Bench(BenchArgs),
    /// Mean factorization ranks across Cholesky tolerances.
    Rank(RankArgs),
    /// Prediction error versus n on a linear-Gaussian model.
    Converge(ConvergeArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the desk-scale grid (n <= 1000, 20 replications).
    #[arg(long)]
    desk: bool,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Maturities in years; fractions like 1/12 are accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_fraction)]
    maturity: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; falls back to the KCME_OUT_DIR environment variable.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl GridArgs {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = match (&self.config, self.desk) {
            (Some(path), false) => ExperimentConfig::from_file(path)?,
            (Some(path), true) => {
                let mut c = ExperimentConfig::desk();
                c.apply_text(&std::fs::read_to_string(path)?)?;
                c
            }
            (None, true) => ExperimentConfig::desk(),
            (None, false) => ExperimentConfig::default(),
        };
        if let Some(n) = &self.n {
            cfg.n_grid = n.clone();
        }
        if let Some(t) = &self.maturity {
            cfg.maturities = t.clone();
        }
        if let Some(r) = self.reps {
            cfg.replications = r;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Result<PathBuf, BenchError> {
        let dir = cfg.resolve_output_dir(self.out.as_deref());
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value = "1", value_parser = parse_fraction)]
    maturity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heston parameters are read from this config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Path file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value = "1", value_parser = parse_fraction)]
    maturity: f64,
    #[arg(long, default_value_t = 100.0)]
    strike: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 4)]
    degree: usize,
    #[arg(long, value_delimiter = ',', default_value = "cme_lr,ls,european_mc")]
    methods: Vec<PricingMethod>,
    /// Condition the CME on (log S, v) at the next date instead of log S.
    #[arg(long)]
    bivariate: bool,
    /// Heston parameters are read from this config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Price on a dumped path file instead of simulating.
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Write the fitted operator as JSON.
    #[arg(long)]
    save_operator: Option<PathBuf>,
    /// Skip fitting and run the recursion with this JSON operator.
    #[arg(long, conflicts_with = "save_operator")]
    load_operator: Option<PathBuf>,
    /// Also print a CRR tree price with this many steps and this volatility,
    /// e.g. `--tree 2000 --tree-sigma 0.2`.
    #[arg(long)]
    tree: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    tree_sigma: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<PricingMethod>>,
    /// Reference implied volatilities (T,strike,implied_vol); required when r != 0.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    reference_paths: Option<usize>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-5,1e-6")]
    epsilons: Vec<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long = "n-grid", value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(BenchError),
    Aborted(usize),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Usage(e)
    }
}

impl From<kcme::Error> for Failure {
    fn from(e: kcme::Error) -> Self {
        Failure::Usage(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Price(a) => price(a),
        Command::Bench(a) => bench(a),
        Command::Rank(a) => rank(a),
        Command::Converge(a) => converge(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Aborted(k)) => {
            eprintln!("error: {k} cell(s) aborted");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn heston_from(config: &Option<PathBuf>) -> Result<ExperimentConfig, BenchError> {
    match config {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let cfg = heston_from(&a.config)?;
    let paths = simulate_heston(&cfg.heston, a.n, a.maturity, a.seed)?;
    write_path_set(&paths, BufWriter::new(File::create(&a.out)?))?;
    println!("wrote {} paths x {} steps (seed {}) to {}", paths.n_paths(), paths.n_steps(), a.seed, a.out.display());
    Ok(())
}

fn print_result(r: &PricingResult) {
    let mut line = format!("{:<12} price {:>12.6}  time {:>12.1} us", r.method.as_str(), r.price, r.elapsed_micros);
    if let Some(se) = r.std_error {
        line += &format!("  se {se:.6}");
    }
    if let (Some(x), Some(y)) = (r.rank_x, r.rank_y) {
        line += &format!("  rank_x {x}  rank_y {y}");
    }
    if r.ridge_fallback {
        line += "  (ridge fallback)";
    }
    println!("{line}");
}

fn price(a: PriceArgs) -> Result<(), Failure> {
    let cfg = heston_from(&a.config)?;
    let paths: PathSet = match &a.paths {
        Some(p) => read_path_set(BufReader::new(File::open(p)?))?,
        None => simulate_heston(&cfg.heston, a.n, a.maturity, a.seed)?,
    };
    let contract = ContractSpec::put(a.strike, paths.maturity())?;
    let response = if a.bivariate { ResponseState::LogPriceAndVariance } else { ResponseState::LogPrice };
    println!(
        "n {}  T {}  n_T {}  K {}  seed {}",
        paths.n_paths(),
        paths.maturity(),
        paths.n_steps(),
        a.strike,
        paths.seed()
    );
    for method in &a.methods {
        match method {
            PricingMethod::CmeLr => {
                let (result, op) = match &a.load_operator {
                    Some(p) => {
                        let op: CmeOperator =
                            serde_json::from_reader(BufReader::new(File::open(p)?)).map_err(BenchError::from)?;
                        (price_with_operator(&paths, &contract, &op)?, op)
                    }
                    None => {
                        let settings = CmeSettings::for_paths(&paths, a.epsilon, response)?;
                        price_american_cme_detailed(&paths, &contract, &settings)?
                    }
                };
                print_result(&result);
                let bound = backward_bound_report(&op, paths.n_steps())?;
                println!(
                    "{:<12} delta_lr {:.3e}  bound_lr_part {:.3e}  statistical part {}",
                    "", bound.delta_lr.delta_lr, bound.bound_lr_part, bound.statistical_part
                );
                if let Some(p) = &a.save_operator {
                    serde_json::to_writer(BufWriter::new(File::create(p)?), &op).map_err(BenchError::from)?;
                    println!("{:<12} operator written to {}", "", p.display());
                }
            }
            PricingMethod::Ls => print_result(&price_american_ls(&paths, &contract, a.degree)?),
            PricingMethod::EuropeanMc => print_result(&european_put_mc(&paths, &contract)?),
            PricingMethod::Binomial => {
                let steps = a.tree.unwrap_or(2000);
                let h = &cfg.heston;
                let v = binomial_american_put(h.s0, a.strike, h.r, a.tree_sigma, paths.maturity(), steps)?;
                println!("{:<12} price {:>12.6}  (sigma {}, {} steps)", "binomial", v, a.tree_sigma, steps);
            }
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let mut cfg = a.grid.load()?;
    if let Some(e) = a.epsilon {
        cfg.epsilon = e;
    }
    if let Some(m) = &a.methods {
        cfg.methods = m.clone();
    }
    if let Some(n) = a.reference_paths {
        cfg.reference_paths = n;
    }
    cfg.validate()?;
    let dir = a.grid.out_dir(&cfg)?;

    let reference = match &a.reference {
        Some(p) => ReferenceTable::read_csv(p)?,
        None if cfg.heston.r == 0.0 => {
            eprintln!("computing European reference with {} paths per maturity", cfg.reference_paths);
            let table = reference_prices_r0(&cfg)?;
            table.write_csv(&dir.join("reference.csv"))?;
            table
        }
        None => {
            return Err(BenchError::NotApplicable(format!(
                "r = {} needs reference implied volatilities; pass --reference <csv>",
                cfg.heston.r
            ))
            .into())
        }
    };

    let total = cfg.replications * cfg.n_grid.len() * cfg.maturities.len() * cfg.moneyness_count * cfg.methods.len();
    let done = AtomicUsize::new(0);
    let outcome = run_grid(&cfg, |_: &ResultRow| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if k % (total / 10).max(1) == 0 || k == total {
            eprintln!("{k}/{total} rows");
        }
    })?;

    let mut rows = outcome.rows.clone();
    for row in &mut rows {
        row.attach_reference(&reference)?;
    }
    write_rows(&dir.join("rows.csv"), &rows)?;
    let timing = timing_summary(&rows);
    let mut written = write_timing_files(&dir, &cfg, &timing)?;
    let summary = aggregate_iv_error(&rows, &reference)?;
    written.extend(write_error_files(&dir, &cfg, &summary)?);
    for c in &summary.by_cell {
        println!(
            "{:<6} n {:>6}  T {:.4}  rel IV error {:.4} [{:.4}, {:.4}]  used {} excluded {}",
            c.method.as_str(),
            c.n,
            c.maturity,
            c.mean,
            c.lo,
            c.hi,
            c.rows_used,
            c.rows_excluded
        );
    }
    let records = rank_records_from_rows(&rows, cfg.epsilon);
    if !records.is_empty() {
        written.extend(write_rank_files(&dir, &cfg.maturities, &rank_summary(&records)?)?);
    }
    for t in &timing {
        println!(
            "{:<6} n {:>6}  T {:.4}  mean log10 time {:.3} [{:.3}, {:.3}]",
            t.method.as_str(),
            t.n,
            t.maturity,
            t.log10_time.mean,
            t.log10_time.lo,
            t.log10_time.hi
        );
    }
    println!(
        "{} rows ({} without implied vol), {} files in {}",
        rows.len(),
        outcome.invalid_rows(),
        written.len() + 1,
        dir.display()
    );
    for f in &outcome.failures {
        eprintln!("cell rep {} n {} T {} aborted: {}", f.cell.rep, f.cell.n, f.cell.maturity, f.message);
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Aborted(outcome.failures.len()))
    }
}

fn rank(a: RankArgs) -> Result<(), Failure> {
    let cfg = a.grid.load()?;
    let dir = a.grid.out_dir(&cfg)?;
    let records = rank_study(&cfg, &a.epsilons)?;
    let stats = rank_summary(&records)?;
    write_rank_files(&dir, &cfg.maturities, &stats)?;
    for s in &stats {
        println!(
            "n {:>6}  T {:.4}  eps {:.0e}  rank_x {:.2} ({}..{})  rank_y {:.2} [{:.2}, {:.2}]",
            s.n,
            s.maturity,
            s.epsilon,
            s.mean_rank_x,
            s.min_rank_x,
            s.max_rank_x,
            s.mean_rank_y,
            s.lo_rank_y,
            s.hi_rank_y
        );
    }
    Ok(())
}

fn converge(a: ConvergeArgs) -> Result<(), Failure> {
    let cfg = ConvergeConfig { n_grid: a.n_grid, reps: a.reps, epsilon: a.epsilon, ..ConvergeConfig::default() };
    let stats = converge_summary(&run_converge(&cfg)?);
    let dir = a.out.unwrap_or_else(|| ExperimentConfig::default().resolve_output_dir(None));
    std::fs::create_dir_all(&dir)?;
    write_converge(&dir.join("converge.csv"), &stats)?;
    for s in &stats {
        println!(
            "n {:>6}  median L2 {:.5}  mean {:.5} [{:.5}, {:.5}]  rank_x {:.1}  rank_y {:.1}",
            s.n, s.median_l2, s.mean_l2, s.lo_l2, s.hi_l2, s.mean_rank_x, s.mean_rank_y
        );
    }
    Ok(())
}
