//! Command-line front end. Every command writes its outputs plus a
//! `manifest.json` into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::Error;
use crate::eval::{self, rmse_per_response, StudyConfig};
use crate::ingest::{self, IngestSpec};
use crate::linalg::DenseMatrix;
use crate::model::{self, Dataset};
use crate::samplers::{self, Method, MethodConfig, Statistic};
use crate::simgen::{self, write_matrix_csv, SimDesign};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(Error),
    #[error("run failed: {0}")]
    Runtime(Error),
    #[error("{failed} of {total} study fits failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Partial { .. } => EXIT_PARTIAL,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(CliError::Config)
}

fn runtime_err<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(CliError::Runtime)
}

#[derive(Debug, Parser)]
#[command(name = "mvselect", version, about = "Bayesian variable selection for multivariate regression")]
pub struct Cli {
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test dataset.
    Simulate(SimulateArgs),
    /// Run one estimator on a dataset directory.
    Fit(FitArgs),
    /// Replicate study over simulated datasets.
    Study(StudyArgs),
    /// Select, clean and split a real table into a dataset directory.
    Ingest(IngestArgs),
    /// Box-plot aggregates and per-response RMSE tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "MVSELECT_OUT", default_value = "mvselect-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON or TOML design file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Directory with train_x.csv and train_y.csv (test_x.csv/test_y.csv optional).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub method: Option<String>,
    /// JSON or TOML method configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long, default_value = "mean")]
    pub summary: String,
    /// Skip writing the per-draw chain files.
    #[arg(long)]
    pub summary_only: bool,
    /// Store wall-clock seconds in the summary.
    #[arg(long)]
    pub record_timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// JSON or TOML study configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated method list.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated training sizes.
    #[arg(long = "n-values")]
    pub n_values: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub summary: Option<String>,
    /// Fill the seconds column (results are then no longer byte-reproducible).
    #[arg(long)]
    pub record_timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// JSON or TOML ingest specification.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    /// Separate test table; outlier drops apply to the training table only.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    pub correlation_threshold: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Study results CSV.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Fit output directories whose summaries carry test RMSE.
    #[arg(long = "fit")]
    pub fits: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub version: String,
    /// Fully resolved configuration the outputs were produced from.
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> crate::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    write_atomic(path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())
}

fn finish_manifest<C: Serialize>(
    command: &str,
    config_path: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    config: &C,
    started: String,
) -> CliResult<()> {
    let m = RunManifest {
        command: command.into(),
        config_path: config_path.map(Path::to_path_buf),
        seed,
        out_dir: out.to_path_buf(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: runtime_err(serde_json::to_value(config).map_err(Error::from))?,
        started,
        finished: now(),
    };
    runtime_err(write_json(&out.join("manifest.json"), &m))
}

/// Parses a JSON or TOML (by extension) configuration file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> crate::Result<T> {
    let text = fs::read_to_string(path)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> CliResult<T> {
    match path {
        Some(p) => config_err(load_config(p)),
        None => Ok(T::default()),
    }
}

fn make_dir(out: &Path) -> CliResult<()> {
    runtime_err(fs::create_dir_all(out).map_err(Error::from))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<PathBuf> {
    let started = now();
    let mut design: SimDesign = load_or_default(args.config.as_ref())?;
    if let Some(s) = args.seed {
        design.seed = s;
    }
    if let Some(n) = args.n {
        design.n = n;
    }
    config_err(design.validate())?;
    let out = &args.output.out;
    make_dir(out)?;
    let data = runtime_err(simgen::generate(&design))?;
    runtime_err(simgen::persist(&data, &design, out))?;
    finish_manifest("simulate", args.config.as_deref(), Some(design.seed), out, &design, started)?;
    Ok(out.clone())
}

/// Raw train (and optional test) tables from a dataset directory, with the
/// test set standardized by the training statistics.
pub fn load_dataset_dir(dir: &Path) -> crate::Result<(Dataset, Option<Dataset>)> {
    let tx = ingest::load_csv(&dir.join("train_x.csv"))?;
    let ty = ingest::load_csv(&dir.join("train_y.csv"))?;
    let train = Dataset::standardized(tx.values, ty.values, tx.names, ty.names)?;
    let (px, py) = (dir.join("test_x.csv"), dir.join("test_y.csv"));
    let test = if px.exists() && py.exists() {
        let x = ingest::load_csv(&px)?;
        let y = ingest::load_csv(&py)?;
        Some(Dataset::with_stats(x.values, y.values, train.x_stats.clone(), train.y_stats.clone(), x.names, y.names)?)
    } else {
        None
    };
    Ok((train, test))
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub method: Method,
    pub statistic: Statistic,
    pub iterations: usize,
    pub burn_in: usize,
    pub retained: usize,
    /// Fewer than 100 retained draws.
    pub low_quality: bool,
    pub predictors: Vec<String>,
    pub responses: Vec<String>,
    pub coefficients: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    pub coefficients_original: Vec<Vec<f64>>,
    pub intercept_original: Vec<f64>,
    pub covariance_original: Vec<Vec<f64>>,
    pub test_rmse: Option<Vec<f64>>,
    pub test_loss_pred: Option<f64>,
    pub seconds: Option<f64>,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<FitSummary> {
    let started = now();
    let statistic: Statistic = config_err(args.summary.parse())?;
    let mut cfg: MethodConfig = match (&args.config, &args.method) {
        (Some(p), None) => config_err(load_config(p))?,
        (Some(p), Some(m)) => {
            let method: Method = config_err(m.parse())?;
            let mut v: serde_json::Value = config_err(load_config(p))?;
            if let Some(obj) = v.as_object_mut() {
                obj.insert("method".into(), serde_json::Value::String(method.as_str().into()));
            }
            config_err(serde_json::from_value(v).map_err(Error::from))?
        }
        (None, Some(m)) => MethodConfig::default_for(config_err(m.parse())?),
        (None, None) => return Err(CliError::Config(Error::InvalidParameter("give --method or --config".into()))),
    };
    {
        let mcmc = cfg.mcmc_mut();
        if let Some(s) = args.seed {
            mcmc.seed = s;
        }
        if let Some(i) = args.iterations {
            mcmc.iterations = i;
        }
        if let Some(b) = args.burn_in {
            mcmc.burn_in = b;
        }
    }
    config_err(cfg.mcmc().validate())?;
    let (train, test) = config_err(load_dataset_dir(&args.data))?;
    let out = &args.output.out;
    make_dir(out)?;
    let clock = Instant::now();
    let fit = runtime_err(samplers::fit(&cfg, &train, statistic))?;
    let seconds = args.record_timing.then(|| clock.elapsed().as_secs_f64());
    if !args.summary_only {
        runtime_err(fit.chain.write_dir(&out.join("chain")))?;
    }
    let b_orig = runtime_err(model::unstandardize_coefficients(&fit.coefficients, &train.x_stats, &train.y_stats))?;
    let (test_rmse, test_loss_pred) = match &test {
        Some(t) => {
            let yhat = runtime_err(model::predict_original_scale(&fit.coefficients, &t.x, &train.y_stats))?;
            (Some(runtime_err(rmse_per_response(&t.y_raw, &yhat))?), Some(runtime_err(eval::loss_frobenius(&yhat, &t.y_raw))?))
        }
        None => (None, None),
    };
    let retained = fit.chain.retained();
    let summary = FitSummary {
        method: fit.method,
        statistic,
        iterations: fit.chain.iterations,
        burn_in: fit.chain.burn_in,
        retained,
        low_quality: retained < 100,
        predictors: train.predictor_names.clone(),
        responses: train.response_names.clone(),
        coefficients: rows_of(&fit.coefficients),
        covariance: rows_of(&fit.covariance),
        intercept_original: model::implied_intercept(&b_orig, &train.x_stats, &train.y_stats),
        coefficients_original: rows_of(&b_orig),
        covariance_original: rows_of(&runtime_err(model::unstandardize_covariance(&fit.covariance, &train.y_stats))?),
        test_rmse,
        test_loss_pred,
        seconds,
    };
    runtime_err(write_json(&out.join("summary.json"), &summary))?;
    finish_manifest("fit", args.config.as_deref(), Some(cfg.mcmc().seed), out, &cfg, started)?;
    Ok(summary)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> crate::Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::InvalidParameter(format!("cannot parse `{t}`"))))
        .collect()
}

pub fn resolve_study_config(args: &StudyArgs) -> CliResult<StudyConfig> {
    let mut cfg: StudyConfig = load_or_default(args.config.as_ref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = &args.method {
        cfg.methods = config_err(parse_list(m))?;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(n) = &args.n_values {
        cfg.n_values = config_err(parse_list(n))?;
    }
    if let Some(i) = args.iterations {
        cfg.iterations = i;
    }
    if let Some(b) = args.burn_in {
        cfg.burn_in = b;
    }
    if let Some(s) = &args.summary {
        cfg.statistic = config_err(s.parse())?;
    }
    cfg.record_timing |= args.record_timing;
    config_err(cfg.validate())?;
    Ok(cfg)
}

/// Runs the study and writes `results.csv` and `summary.json`. Returns the
/// rows even when some fits failed; the error then carries the count.
pub fn cmd_study(args: &StudyArgs) -> CliResult<Vec<eval::ReplicateResult>> {
    let started = now();
    let cfg = resolve_study_config(args)?;
    let out = &args.output.out;
    make_dir(out)?;
    let rows = runtime_err(eval::run_replicate_study(&cfg))?;
    let mut csv = Vec::new();
    runtime_err(eval::write_results_csv(&rows, cfg.design.q, &mut csv))?;
    runtime_err(write_atomic(&out.join("results.csv"), &csv))?;
    runtime_err(write_json(&out.join("summary.json"), &eval::summarize(&rows)))?;
    finish_manifest("study", args.config.as_deref(), Some(cfg.seed), out, &cfg, started)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        return Err(CliError::Partial { failed, total: rows.len() });
    }
    Ok(rows)
}

pub fn cmd_ingest(args: &IngestArgs) -> CliResult<ingest::CorrelationReport> {
    let started = now();
    let spec: IngestSpec = config_err(load_config(&args.config))?;
    let train = config_err(ingest::load_csv(&args.train))?;
    let test = args.test.as_deref().map(ingest::load_csv).transpose().map_err(CliError::Config)?;
    let (tr, te) = config_err(ingest::standardize_tables(&train, test.as_ref(), &spec))?;
    let report = config_err(ingest::correlation_report(&tr.x_raw, args.correlation_threshold))?;
    let out = &args.output.out;
    make_dir(out)?;
    runtime_err(write_matrix_csv(&out.join("train_x.csv"), &tr.x_raw, &tr.predictor_names))?;
    runtime_err(write_matrix_csv(&out.join("train_y.csv"), &tr.y_raw, &tr.response_names))?;
    if te.n() > 0 {
        runtime_err(write_matrix_csv(&out.join("test_x.csv"), &te.x_raw, &te.predictor_names))?;
        runtime_err(write_matrix_csv(&out.join("test_y.csv"), &te.y_raw, &te.response_names))?;
    }
    runtime_err(write_json(&out.join("correlation.json"), &report))?;
    finish_manifest("ingest", Some(&args.config), None, out, &spec, started)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub method: Method,
    pub rmse: Vec<f64>,
    pub loss_pred: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes box-plot aggregates for a results CSV and/or a per-response RMSE
/// table for fit directories.
pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let started = now();
    if args.results.is_none() && args.fits.is_empty() {
        return Err(CliError::Config(Error::InvalidParameter("give --results and/or --fit".into())));
    }
    let out = &args.output.out;
    make_dir(out)?;
    if let Some(path) = &args.results {
        let rows = config_err(eval::read_results_csv(path))?;
        let groups = eval::summarize(&rows);
        runtime_err(write_json(&out.join("boxplot.json"), &groups))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let res = (|| -> crate::Result<Vec<u8>> {
            w.write_record(["n", "method", "metric", "count", "errors", "lower_whisker", "q1", "median", "q3", "upper_whisker", "min", "max"])?;
            for g in &groups {
                for (metric, b) in [("loss_B", &g.loss_b), ("loss_Sigma", &g.loss_sigma), ("loss_pred", &g.loss_pred)] {
                    let Some(b) = b else { continue };
                    let mut rec = vec![g.n.to_string(), g.method.to_string(), metric.to_string(), b.count.to_string(), g.errors.to_string()];
                    rec.extend([b.lower_whisker, b.q1, b.median, b.q3, b.upper_whisker, b.min, b.max].iter().map(|v| format!("{v}")));
                    w.write_record(&rec)?;
                }
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        })();
        runtime_err(res.and_then(|bytes| write_atomic(&out.join("boxplot.csv"), &bytes)))?;
    }
    if !args.fits.is_empty() {
        let mut table: Vec<(RmseRow, Vec<String>)> = Vec::new();
        for dir in &args.fits {
            let text = config_err(fs::read_to_string(dir.join("summary.json")).map_err(Error::from))?;
            let s: FitSummary = config_err(serde_json::from_str(&text).map_err(Error::from))?;
            let rmse = s.test_rmse.ok_or_else(|| CliError::Config(Error::Data(format!("{} has no test RMSE", dir.display()))))?;
            table.push((RmseRow { method: s.method, rmse, loss_pred: s.test_loss_pred }, s.responses));
        }
        let responses = table[0].1.clone();
        let res = (|| -> crate::Result<Vec<u8>> {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["method".to_string()];
            header.extend(responses.iter().cloned());
            header.push("loss_pred".into());
            w.write_record(&header)?;
            for (row, _) in &table {
                let mut rec = vec![row.method.to_string()];
                rec.extend(row.rmse.iter().map(|v| format!("{v:.3}")));
                rec.push(fmt_opt(row.loss_pred.map(|v| (v * 1000.0).round() / 1000.0)));
                w.write_record(&rec)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        })();
        runtime_err(res.and_then(|bytes| write_atomic(&out.join("rmse_table.csv"), &bytes)))?;
        let rows: Vec<RmseRow> = table.into_iter().map(|(r, _)| r).collect();
        runtime_err(write_json(&out.join("rmse_table.json"), &rows))?;
    }
    let cfg = serde_json::json!({ "results": args.results, "fits": args.fits });
    finish_manifest("report", None, None, out, &cfg, started)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let go = || match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| ()),
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
        Command::Study(a) => cmd_study(a).map(|_| ()),
        Command::Ingest(a) => cmd_ingest(a).map(|r| {
            println!("max |corr| {:.4}, min |corr| {:.4}, {:.1}% of pairs >= {}", r.max_abs, r.min_abs, 100.0 * r.fraction_above, r.threshold);
        }),
        Command::Report(a) => cmd_report(a),
    };
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(Error::InvalidParameter(e.to_string())))?;
            pool.install(go)
        }
        None => go(),
    }
}

/// Parses arguments, runs, and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
