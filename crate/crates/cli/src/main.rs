//! `segpc` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or validation error,
//! 3 solver or numerical failure.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use segpc::pipeline::{convergence_study, fit_and_report, write_moments_csv, write_selection_csv, CSV_SCHEMA};
use segpc::postproc::HigherMomentScheme;
use segpc::{
    exec, monte_carlo_moments, select_points, sobol_total, ChaosBasis, Error, FitOptions, Method, Model,
    MomentsReport, OdeModel,
};

use config::{ModelSpec, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    /// Map a library error raised while validating inputs.
    pub fn from_config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::SizeOverflow(_)
            | Error::UnsupportedModel(_)
            | Error::InsufficientSamples { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Command-line values that override config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub method: Option<String>,
    pub orders: Option<Vec<usize>>,
    pub order: Option<usize>,
    pub seed: Option<u64>,
    pub oversample: Option<f64>,
    pub reference: Option<PathBuf>,
    pub pool: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "segpc", version, about = "Gradient-enhanced polynomial chaos surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one surrogate and write surrogate.json and fit.csv.
    Fit {
        #[command(flatten)]
        common: Common,
        /// For Burgers, also write the flow fields at the mean input.
        #[arg(long)]
        export_fields: bool,
    },
    /// Fit every (method, order) pair and write convergence.csv.
    Convergence(Common),
    /// Rank pool points by pivoted QR and write points.csv.
    SelectPoints {
        #[command(flatten)]
        common: Common,
        /// Number of points to rank (default P + 1).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Monte Carlo reference: mc.csv, mc.json and trace.csv.
    Mc(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for model evaluations; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ode, ishigami or burgers with default parameters.
    #[arg(long)]
    model: Option<String>,
    /// segpc, wlsq or smolyak; comma-separated for `convergence`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// Comma-separated chaos orders for `convergence`.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    oversample: Option<f64>,
    /// Reference moments file (JSON or CSV written by `mc`).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let o = Overrides {
            model: self.model.clone(),
            method: self.method.clone(),
            orders: self.orders.clone(),
            order: self.order,
            seed: self.seed,
            oversample: self.oversample,
            reference: self.reference.clone(),
            pool: self.pool,
            workers: self.workers,
            out: self.out.clone(),
            samples: self.samples,
        };
        config::load(self.config.as_deref(), &o)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let (cfg, job): (RunConfig, Box<dyn FnOnce(&RunConfig) -> Result<(), CliError> + Send>) = match command {
        Command::Fit { common, export_fields } => (common.load()?, Box::new(move |c| cmd_fit(c, export_fields))),
        Command::Convergence(common) => (common.load()?, Box::new(cmd_convergence)),
        Command::SelectPoints { common, points } => (common.load()?, Box::new(move |c| cmd_select_points(c, points))),
        Command::Mc(common) => (common.load()?, Box::new(cmd_mc)),
    };
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
    exec::with_workers(cfg.workers, || job(&cfg))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn single_method(cfg: &RunConfig) -> Result<Method, CliError> {
    match cfg.methods.as_slice() {
        [] => Ok(Method::Segpc),
        [m] => Ok(*m),
        _ => Err(CliError::Config("`fit` takes a single method".into())),
    }
}

fn single_order(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.orders.as_slice() {
        [p] => Ok(*p),
        [] => Err(CliError::Config("no chaos order given (config `order` or --order)".into())),
        _ => Err(CliError::Config("this command takes a single order".into())),
    }
}

fn check_compatible(method: Method, model: &dyn Model) -> Result<(), CliError> {
    match method {
        Method::Mc => Err(CliError::Config("mc is not a surrogate method; use the `mc` subcommand".into())),
        Method::Segpc if !model.supports_gradient() => {
            Err(CliError::Config(format!("segpc needs a gradient-capable model; {} has none", model.name())))
        }
        _ => Ok(()),
    }
}

fn fit_options(cfg: &RunConfig, method: Method, order: usize) -> FitOptions {
    FitOptions { method, order, pool: cfg.pool, oversample: cfg.oversample, seed: cfg.seed }
}

fn moment_scheme(cfg: &RunConfig) -> HigherMomentScheme {
    HigherMomentScheme::Auto { samples: cfg.moment_samples, seed: cfg.seed }
}

fn cmd_fit(cfg: &RunConfig, export_fields: bool) -> Result<(), CliError> {
    let method = single_method(cfg)?;
    let order = single_order(cfg)?;
    let times = cfg.ode_times()?;
    if times.len() > 1 {
        return fit_ode_curve(cfg, method, order, &times);
    }
    let t = times[0];
    let model = cfg.build_model(t)?;
    check_compatible(method, model.as_ref())?;
    let (outcome, report) = fit_and_report(model.as_ref(), &fit_options(cfg, method, order), moment_scheme(cfg))?;
    let reference = cfg.reference(t)?;
    let sobol = sobol_total(&outcome.surrogate).ok();

    let mut json = create(&cfg.out, "surrogate.json")?;
    writeln!(json, "{}", outcome.surrogate.to_json())?;
    json.flush()?;

    let mut csv = create(&cfg.out, "fit.csv")?;
    writeln!(csv, "# {CSV_SCHEMA} fit")?;
    let sobol_cols: Vec<String> = (1..=report.m).map(|k| format!("sobol_{k}")).collect();
    writeln!(csv, "{},{}", MomentsReport::CSV_HEADER, sobol_cols.join(","))?;
    let sobol_cells: Vec<String> = match &sobol {
        Some(s) => s.total_indices.iter().map(|v| v.to_string()).collect(),
        None => vec![String::new(); report.m],
    };
    writeln!(csv, "{},{}", report.csv_row(reference.as_ref()), sobol_cells.join(","))?;
    csv.flush()?;

    if export_fields {
        export_burgers_fields(cfg)?;
    }

    println!(
        "{method} p={order}: {} evaluations, mean {}, std {}",
        report.evaluation_count, report.mean, report.std
    );
    if let Some(s) = sobol {
        println!("total Sobol indices: {:?}", s.total_indices);
    }
    Ok(())
}

#[derive(Serialize)]
struct TimedSurrogate {
    t: f64,
    surrogate: serde_json::Value,
}

/// Fit one surrogate per ODE time and compare with the closed forms.
fn fit_ode_curve(cfg: &RunConfig, method: Method, order: usize, times: &[Option<f64>]) -> Result<(), CliError> {
    let mut csv = create(&cfg.out, "ode_curve.csv")?;
    writeln!(csv, "# {CSV_SCHEMA} ode-curve")?;
    writeln!(csv, "t,evaluation_count,mean,variance,exact_mean,exact_variance,err_mean,err_variance")?;
    let mut surrogates = Vec::with_capacity(times.len());
    let (mut max_mean, mut max_var) = (0.0f64, 0.0f64);
    for &t in times {
        let t = t.expect("ode times are set");
        let model = cfg.build_model(Some(t))?;
        check_compatible(method, model.as_ref())?;
        let (outcome, report) =
            fit_and_report(model.as_ref(), &fit_options(cfg, method, order), moment_scheme(cfg))?;
        let (em, ev) = if cfg.space.is_none() {
            (Some(OdeModel::exact_mean(t)), Some(OdeModel::exact_variance(t)))
        } else {
            (None, None)
        };
        let rel = |got: f64, want: f64| if want == 0.0 { (got - want).abs() } else { ((got - want) / want).abs() };
        let err_mean = em.map(|e| rel(report.mean, e));
        let err_var = ev.map(|e| rel(report.variance, e));
        max_mean = max_mean.max(err_mean.unwrap_or(0.0));
        max_var = max_var.max(err_var.unwrap_or(0.0));
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{t},{},{},{},{},{},{},{}",
            report.evaluation_count,
            report.mean,
            report.variance,
            cell(em),
            cell(ev),
            cell(err_mean),
            cell(err_var)
        )?;
        let value = serde_json::from_str(&outcome.surrogate.to_json())
            .map_err(|e| CliError::Io(format!("surrogate JSON: {e}")))?;
        surrogates.push(TimedSurrogate { t, surrogate: value });
    }
    csv.flush()?;
    let mut json = create(&cfg.out, "surrogates.json")?;
    let text = serde_json::to_string_pretty(&surrogates).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(json, "{text}")?;
    json.flush()?;
    println!("{method} p={order} over {} times", times.len());
    if cfg.space.is_none() {
        println!("max relative error: mean {max_mean:e}, variance {max_var:e}");
    }
    Ok(())
}

fn export_burgers_fields(cfg: &RunConfig) -> Result<(), CliError> {
    let ModelSpec::Burgers { grid, re, means, .. } = &cfg.model else {
        return Err(CliError::Config("--export-fields needs the burgers model".into()));
    };
    let means = means.clone().unwrap_or_else(|| segpc::models::burgers::NOMINAL_COEFFICIENTS.to_vec());
    let solver = segpc::BurgersSolver::new(*grid, *re).map_err(CliError::from_config)?;
    let state = solver.solve(&means)?;
    let mut out = create(&cfg.out, "fields.csv")?;
    writeln!(out, "# {CSV_SCHEMA} burgers-fields")?;
    state.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let times = cfg.ode_times()?;
    if times.len() > 1 {
        return Err(CliError::Config("`convergence` takes a single ode time".into()));
    }
    let t = times[0];
    if cfg.orders.is_empty() {
        return Err(CliError::Config("no chaos orders given (config `orders` or --orders)".into()));
    }
    let reference = cfg
        .reference(t)?
        .ok_or_else(|| CliError::Config("no reference moments: pass --reference or a config `reference`".into()))?;
    let model = cfg.build_model(t)?;
    let methods = if cfg.methods.is_empty() { Method::ALL_FITS.to_vec() } else { cfg.methods.clone() };
    for &m in &methods {
        check_compatible(m, model.as_ref())?;
    }
    let base = fit_options(cfg, methods[0], cfg.orders[0]);
    let rows = convergence_study(model.as_ref(), &methods, &cfg.orders, &base, moment_scheme(cfg))?;
    let mut out = create(&cfg.out, "convergence.csv")?;
    write_moments_csv(&mut out, "convergence", &rows, Some(&reference))?;
    out.flush()?;
    for r in &rows {
        let e = r.errors(&reference);
        println!("{} p={}: {} evaluations, err_mean {:e}, err_std {:e}", r.method, r.p, r.evaluation_count, e.mean, e.std);
    }
    Ok(())
}

fn cmd_select_points(cfg: &RunConfig, points: Option<usize>) -> Result<(), CliError> {
    let order = single_order(cfg)?;
    let t = cfg.ode_times()?[0];
    let model = cfg.build_model(t)?;
    let space = model.space();
    let n_terms = ChaosBasis::for_space(space, order)?.len();
    if cfg.pool < n_terms {
        return Err(CliError::Config(format!("pool of {} is smaller than P + 1 = {n_terms}", cfg.pool)));
    }
    let n = points.unwrap_or(n_terms);
    let sel = select_points(space, order, cfg.pool, n, cfg.seed)?;
    let mut out = create(&cfg.out, "points.csv")?;
    write_selection_csv(&mut out, &sel)?;
    out.flush()?;
    let cond = sel.plans.first().and_then(|p| p.cond_number);
    match cond {
        Some(c) => println!("ranked {n} of {} points; condition number {c}", cfg.pool),
        None => println!("ranked {n} of {} points", cfg.pool),
    }
    Ok(())
}

#[derive(Serialize)]
struct McJson {
    n: usize,
    seed: u64,
    mean: f64,
    std: f64,
    variance: f64,
    std_error: f64,
    skewness: Option<f64>,
    kurtosis: Option<f64>,
}

fn cmd_mc(cfg: &RunConfig) -> Result<(), CliError> {
    let times = cfg.ode_times()?;
    if times.len() > 1 {
        return Err(CliError::Config("`mc` takes a single ode time".into()));
    }
    let model = cfg.build_model(times[0])?;
    let est = monte_carlo_moments(model.as_ref(), cfg.samples, cfg.seed, cfg.trace)?;
    let report = MomentsReport {
        method: Method::Mc,
        m: model.dim(),
        p: 0,
        evaluation_count: est.n,
        mean: est.mean,
        variance: est.variance,
        std: est.std,
        skewness: est.skewness,
        kurtosis: est.kurtosis,
    };
    let reference = cfg.reference(times[0])?;
    let mut csv = create(&cfg.out, "mc.csv")?;
    write_moments_csv(&mut csv, "mc", std::slice::from_ref(&report), reference.as_ref())?;
    csv.flush()?;

    let summary = McJson {
        n: est.n,
        seed: cfg.seed,
        mean: est.mean,
        std: est.std,
        variance: est.variance,
        std_error: est.std_error(),
        skewness: est.skewness,
        kurtosis: est.kurtosis,
    };
    let mut json = create(&cfg.out, "mc.json")?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(json, "{text}")?;
    json.flush()?;

    if let Some(trace) = &est.trace {
        let mut out = create(&cfg.out, "trace.csv")?;
        writeln!(out, "# {CSV_SCHEMA} trace")?;
        writeln!(out, "index,value")?;
        for (i, v) in trace.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        out.flush()?;
    }
    println!("mc n={}: mean {} ± {}, std {}", est.n, est.mean, est.std_error(), est.std);
    Ok(())
}
