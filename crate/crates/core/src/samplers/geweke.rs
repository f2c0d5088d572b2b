//! Successive-conditional ("getting it right") check of a Gibbs kernel.
//!
//! A chain that alternates one kernel sweep with a fresh draw of the data
//! given the parameters has the prior as its stationary law. Means of test
//! functions along that chain are compared with means over independent prior
//! draws; a correct kernel gives z-scores of order one.
//!
//! The transitions can be split over several chains, each started from an
//! exact prior draw. Every chain is then stationary from its first step and
//! the standard error comes from the spread of the per-chain means, which
//! stays honest for heavy-tailed priors where one long chain gets stuck in
//! rare regions for far longer than any batch.

use serde::Serialize;

use crate::dist::standard_normal_matrix;
use crate::error::Result;
use crate::eval::mcse_batch_means;
use crate::linalg::DenseMatrix;
use crate::rng::RngStream;
use crate::samplers::dhs::DhsKernel;
use crate::samplers::dss::DssKernel;
use crate::samplers::mbsp::MbspKernel;
use crate::samplers::problem::Problem;
use crate::samplers::{DhsConfig, DssConfig, GibbsKernel, MbspConfig, Method};

/// `sqrt(Sigma_kk)` for every response and the first error correlation.
pub fn covariance_functions(sigma: &DenseMatrix) -> Vec<(String, f64)> {
    let q = sigma.nrows();
    let mut out: Vec<(String, f64)> = (0..q).map(|k| (format!("sqrt(Sigma[{k},{k}])"), sigma[(k, k)].sqrt())).collect();
    if q > 1 {
        out.push(("corr(Sigma[0,1])".into(), sigma[(0, 1)] / (sigma[(0, 0)] * sigma[(1, 1)]).sqrt()));
    }
    out
}

/// Bounded functions of coefficients whose prior has no finite mean.
pub fn heavy_tailed_coefficient_functions(b: &DenseMatrix) -> Vec<(String, f64)> {
    let (p, q) = b.shape();
    let mut out = Vec::new();
    for j in 0..p {
        for k in 0..q {
            out.push((format!("atan(B[{j},{k}])"), b[(j, k)].atan()));
            out.push((format!("|B[{j},{k}]| < 1"), if b[(j, k)].abs() < 1.0 { 1.0 } else { 0.0 }));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GewekeSettings {
    /// Successive-conditional transitions, summed over chains.
    pub steps: usize,
    /// Independent chains; with one chain the standard error uses batch means.
    pub chains: usize,
    /// Independent prior draws for the reference means.
    pub prior_draws: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for GewekeSettings {
    fn default() -> Self {
        Self { steps: 200_000, chains: 1000, prior_draws: 200_000, batches: 400, seed: 2024 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GewekeRow {
    pub name: String,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GewekeReport {
    pub method: Method,
    pub rows: Vec<GewekeRow>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.rows.iter().all(|r| r.z.abs() < threshold)
    }
}

fn regenerate(prob: &mut Problem, b: &DenseMatrix, chol: &DenseMatrix, rng: &mut RngStream) {
    let z = standard_normal_matrix(prob.n(), prob.q(), rng);
    let y = prob.x() * b + z * chol.transpose();
    prob.set_y(y);
}

pub fn geweke_test<K: GibbsKernel>(kernel: &K, x: &DenseMatrix, q: usize, settings: &GewekeSettings) -> Result<GewekeReport> {
    let p = x.ncols();
    let mut rng = RngStream::derive(settings.seed, &[0]);
    let mut prior_vals: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for t in 0..settings.prior_draws {
        let st = kernel.prior_state(p, q, &mut rng)?;
        let f = kernel.geweke_functions(&st);
        if t == 0 {
            names = f.iter().map(|(n, _)| n.clone()).collect();
            prior_vals = vec![Vec::with_capacity(settings.prior_draws); f.len()];
        }
        for (i, (_, v)) in f.into_iter().enumerate() {
            prior_vals[i].push(v);
        }
    }

    let chains = settings.chains.max(1);
    let per_chain = settings.steps.div_ceil(chains);
    let mut chain_vals: Vec<Vec<f64>> = vec![Vec::with_capacity(per_chain * chains); names.len()];
    let mut chain_means: Vec<Vec<f64>> = vec![Vec::with_capacity(chains); names.len()];
    for c in 0..chains {
        let mut rng = RngStream::derive(settings.seed, &[1, c as u64]);
        let mut state = kernel.prior_state(p, q, &mut rng)?;
        let mut prob = Problem::new(x.clone(), DenseMatrix::zeros(x.nrows(), q))?;
        regenerate(&mut prob, kernel.coefficients(&state), kernel.covariance(&state).cholesky(), &mut rng);
        let mut sums = vec![0.0; names.len()];
        for _ in 0..per_chain {
            kernel.sweep(&mut state, &prob, &mut rng)?;
            regenerate(&mut prob, kernel.coefficients(&state), kernel.covariance(&state).cholesky(), &mut rng);
            for (i, (_, v)) in kernel.geweke_functions(&state).into_iter().enumerate() {
                chain_vals[i].push(v);
                sums[i] += v;
            }
        }
        for (i, s) in sums.into_iter().enumerate() {
            chain_means[i].push(s / per_chain as f64);
        }
    }

    let mut rows = Vec::with_capacity(names.len());
    for (i, name) in names.into_iter().enumerate() {
        let pv = &prior_vals[i];
        let n = pv.len() as f64;
        let prior_mean = pv.iter().sum::<f64>() / n;
        let prior_var = pv.iter().map(|v| (v - prior_mean).powi(2)).sum::<f64>() / (n - 1.0);
        let prior_se = (prior_var / n).sqrt();
        let cv = &chain_vals[i];
        let chain_mean = cv.iter().sum::<f64>() / cv.len() as f64;
        let chain_se = if chains == 1 {
            mcse_batch_means(cv, settings.batches)?
        } else {
            let m = &chain_means[i];
            let c = m.len() as f64;
            let mm = m.iter().sum::<f64>() / c;
            (m.iter().map(|v| (v - mm).powi(2)).sum::<f64>() / (c - 1.0) / c).sqrt()
        };
        let denom = (prior_se * prior_se + chain_se * chain_se).sqrt();
        let z = if denom > 0.0 { (chain_mean - prior_mean) / denom } else { 0.0 };
        rows.push(GewekeRow { name, prior_mean, prior_se, chain_mean, chain_se, z });
    }
    Ok(GewekeReport { method: kernel.method(), rows })
}

/// Runs the check for one method with its default prior.
pub fn geweke_for(method: Method, x: &DenseMatrix, q: usize, settings: &GewekeSettings) -> Result<GewekeReport> {
    match method {
        Method::Dss => geweke_test(&DssKernel { cfg: DssConfig::default() }, x, q, settings),
        Method::Dhs => geweke_test(&DhsKernel { cfg: DhsConfig::default() }, x, q, settings),
        Method::Mbsp => geweke_test(&MbspKernel::new(MbspConfig::default(), x.nrows(), x.ncols()), x, q, settings),
        Method::TwoStep => Err(crate::error::Error::InvalidParameter(
            "the two-step estimator has no joint prior to check".into(),
        )),
    }
}
