//! Losses, per-response prediction error, batch-means standard errors and the
//! replicate-study harness.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, DenseMatrix};
use crate::model::{predict, predict_original_scale, unstandardize_coefficients, unstandardize_covariance};
use crate::rng::derive_seed;
use crate::samplers::{fit, DhsConfig, DssConfig, Fit, MbspConfig, Method, MethodConfig, Statistic, TwoStepConfig};
use crate::simgen::{generate, SimData, SimDesign};

pub fn loss_frobenius(estimate: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!("estimate is {:?} but truth is {:?}", estimate.shape(), truth.shape())));
    }
    Ok(frobenius_norm(&(truth - estimate)))
}

pub fn rmse_per_response(y_star: &DenseMatrix, y_hat: &DenseMatrix) -> Result<Vec<f64>> {
    if y_star.shape() != y_hat.shape() {
        return Err(Error::DimensionMismatch(format!("Y* is {:?} but prediction is {:?}", y_star.shape(), y_hat.shape())));
    }
    let n = y_star.nrows() as f64;
    Ok((0..y_star.ncols())
        .map(|k| (y_star.column(k).iter().zip(y_hat.column(k).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt())
        .collect())
}

/// Standard error of the series mean from `batches` non-overlapping batch
/// means. Leading values that do not fill a batch are dropped.
pub fn mcse_batch_means(series: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(Error::SeriesTooShort { len: series.len(), batches });
    }
    let size = series.len() / batches;
    let start = series.len() - size * batches;
    let means: Vec<f64> = series[start..].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let b = batches as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1.0);
    Ok((var / b).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Original,
    Standardized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Losses {
    pub loss_b: f64,
    pub loss_sigma: f64,
    pub loss_pred: f64,
    pub rmse: Vec<f64>,
}

/// Losses against the simulation truth. `B` and `Sigma` are compared on the
/// original scale; prediction error uses `scale`.
pub fn evaluate(fit: &Fit, data: &SimData, scale: Scale) -> Result<Losses> {
    let train = &data.train;
    let b_orig = unstandardize_coefficients(&fit.coefficients, &train.x_stats, &train.y_stats)?;
    let sigma_orig = unstandardize_covariance(&fit.covariance, &train.y_stats)?;
    let (y_star, y_hat) = match scale {
        Scale::Original => (data.test.y_raw.clone(), predict_original_scale(&fit.coefficients, &data.test.x, &train.y_stats)?),
        Scale::Standardized => (data.test.y.clone(), predict(&fit.coefficients, &data.test.x)?),
    };
    Ok(Losses {
        loss_b: loss_frobenius(&b_orig, &data.b_true)?,
        loss_sigma: loss_frobenius(&sigma_orig, &data.sigma_true)?,
        loss_pred: loss_frobenius(&y_hat, &y_star)?,
        rmse: rmse_per_response(&y_star, &y_hat)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub n: usize,
    pub replicate: usize,
    pub method: Method,
    /// `Err` holds the failure message of a fit that did not complete.
    pub outcome: std::result::Result<Losses, String>,
    pub seconds: Option<f64>,
}

impl ReplicateResult {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub design: SimDesign,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub n_values: Vec<usize>,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub statistic: Statistic,
    pub scale: Scale,
    pub record_timing: bool,
    pub twostep: TwoStepConfig,
    pub dss: DssConfig,
    pub dhs: DhsConfig,
    pub mbsp: MbspConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            design: SimDesign::default(),
            methods: Method::ALL.to_vec(),
            replicates: 25,
            n_values: vec![40, 80, 200],
            seed: 1,
            iterations: 10_000,
            burn_in: 100,
            thin: 1,
            statistic: Statistic::Mean,
            scale: Scale::Original,
            record_timing: false,
            twostep: TwoStepConfig::default(),
            dss: DssConfig::default(),
            dhs: DhsConfig::default(),
            mbsp: MbspConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.n_values.is_empty() || self.replicates == 0 {
            return Err(Error::InvalidParameter("a study needs at least one method, one n and one replicate".into()));
        }
        for &n in &self.n_values {
            SimDesign { n, ..self.design.clone() }.validate()?;
        }
        crate::samplers::McmcSettings { iterations: self.iterations, burn_in: self.burn_in, thin: self.thin, seed: 0 }.validate()
    }

    /// Methods in canonical order without duplicates.
    pub fn canonical_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }

    pub fn method_config(&self, method: Method, seed: u64) -> MethodConfig {
        let mut cfg = match method {
            Method::TwoStep => MethodConfig::TwoStep(self.twostep.clone()),
            Method::Dss => MethodConfig::Dss(self.dss.clone()),
            Method::Dhs => MethodConfig::Dhs(self.dhs.clone()),
            Method::Mbsp => MethodConfig::Mbsp(self.mbsp.clone()),
        };
        let mcmc = cfg.mcmc_mut();
        mcmc.iterations = self.iterations;
        mcmc.burn_in = self.burn_in;
        mcmc.thin = self.thin;
        mcmc.seed = seed;
        cfg
    }

    pub fn data_seed(&self, n: usize, replicate: usize) -> u64 {
        derive_seed(self.seed, &[n as u64, replicate as u64])
    }

    pub fn fit_seed(&self, n: usize, replicate: usize, method: Method) -> u64 {
        derive_seed(self.seed, &[n as u64, replicate as u64, method.code()])
    }
}

fn run_one(cfg: &StudyConfig, n: usize, replicate: usize, method: Method) -> ReplicateResult {
    let start = Instant::now();
    let outcome = (|| {
        let design = SimDesign { n, seed: cfg.data_seed(n, replicate), ..cfg.design.clone() };
        let data = generate(&design)?;
        let f = fit(&cfg.method_config(method, cfg.fit_seed(n, replicate, method)), &data.train, cfg.statistic)?;
        evaluate(&f, &data, cfg.scale)
    })()
    .map_err(|e: Error| e.to_string());
    let seconds = cfg.record_timing.then(|| start.elapsed().as_secs_f64());
    ReplicateResult { n, replicate, method, outcome, seconds }
}

/// Every `(n, replicate, method)` combination, run in parallel on the
/// current rayon pool. Rows come back sorted by `n`, replicate, method.
pub fn run_replicate_study(cfg: &StudyConfig) -> Result<Vec<ReplicateResult>> {
    cfg.validate()?;
    let methods = &cfg.canonical_methods();
    let mut n_values = cfg.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    let tasks: Vec<(usize, usize, Method)> = n_values
        .iter()
        .flat_map(|&n| (0..cfg.replicates).flat_map(move |r| methods.iter().map(move |&m| (n, r, m))))
        .collect();
    Ok(tasks.into_par_iter().map(|(n, r, m)| run_one(cfg, n, r, m)).collect())
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn write_results_csv<W: Write>(rows: &[ReplicateResult], q: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["n", "replicate", "method", "loss_B", "loss_Sigma", "loss_pred"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=q).map(|k| format!("rmse_{k}")));
    header.push("seconds".into());
    header.push("status".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), (r.replicate + 1).to_string(), r.method.to_string()];
        match &r.outcome {
            Ok(l) => {
                rec.extend([fmt_f(l.loss_b), fmt_f(l.loss_sigma), fmt_f(l.loss_pred)]);
                rec.extend(l.rmse.iter().map(|v| fmt_f(*v)));
            }
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 3 + q)),
        }
        rec.push(r.seconds.map(fmt_f).unwrap_or_default());
        rec.push(match &r.outcome {
            Ok(_) => "ok".into(),
            Err(msg) => format!("error: {msg}"),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(rows: &[ReplicateResult], q: usize, path: &Path) -> Result<()> {
    write_results_csv(rows, q, std::fs::File::create(path)?)
}

/// Parses a results CSV back into rows (used by `report`).
pub fn read_results_csv(path: &Path) -> Result<Vec<ReplicateResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let q = headers.iter().filter(|h| h.starts_with("rmse_")).count();
    let parse = |s: &str, row: usize, col: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse { row, column: col.to_string(), msg: e.to_string() })
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let n = parse(get(0), row, "n")? as usize;
        let replicate = (parse(get(1), row, "replicate")? as usize).saturating_sub(1);
        let method: Method = get(2).parse()?;
        let status = get(7 + q);
        let outcome = if status == "ok" {
            Ok(Losses {
                loss_b: parse(get(3), row, "loss_B")?,
                loss_sigma: parse(get(4), row, "loss_Sigma")?,
                loss_pred: parse(get(5), row, "loss_pred")?,
                rmse: (0..q).map(|k| parse(get(6 + k), row, &headers[6 + k])).collect::<Result<_>>()?,
            })
        } else {
            Err(status.trim_start_matches("error: ").to_string())
        };
        let seconds = if get(6 + q).is_empty() { None } else { Some(parse(get(6 + q), row, "seconds")?) };
        rows.push(ReplicateResult { n, replicate, method, outcome, seconds });
    }
    Ok(rows)
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// Whiskers reach the most extreme values within 1.5 IQR of the box.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
        Some(Self {
            count: v.len(),
            min: v[0],
            lower_whisker: inside.first().copied().unwrap_or(q1),
            q1,
            median: quantile(&v, 0.5),
            q3,
            upper_whisker: inside.last().copied().unwrap_or(q3),
            max: v[v.len() - 1],
            outliers: v.iter().copied().filter(|x| *x < lo || *x > hi).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub method: Method,
    pub ok: usize,
    pub errors: usize,
    pub loss_b: Option<BoxStats>,
    pub loss_sigma: Option<BoxStats>,
    pub loss_pred: Option<BoxStats>,
    pub median_rmse: Vec<f64>,
}

/// Box-plot statistics per `(n, method)`; error rows are only counted.
pub fn summarize(rows: &[ReplicateResult]) -> Vec<GroupSummary> {
    let mut keys: Vec<(usize, Method)> = rows.iter().map(|r| (r.n, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(n, method)| {
            let group: Vec<&ReplicateResult> = rows.iter().filter(|r| r.n == n && r.method == method).collect();
            let ok: Vec<&Losses> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let pick = |f: fn(&Losses) -> f64| BoxStats::from_values(&ok.iter().map(|l| f(l)).collect::<Vec<_>>());
            let q = ok.first().map_or(0, |l| l.rmse.len());
            GroupSummary {
                n,
                method,
                ok: ok.len(),
                errors: group.len() - ok.len(),
                loss_b: pick(|l| l.loss_b),
                loss_sigma: pick(|l| l.loss_sigma),
                loss_pred: pick(|l| l.loss_pred),
                median_rmse: (0..q).filter_map(|k| median(&ok.iter().map(|l| l.rmse[k]).collect::<Vec<_>>())).collect(),
            }
        })
        .collect()
}
