//! The four estimators: `dss` (joint spike-and-slab with a full error
//! covariance), `twostep` (per-response spike-and-slab followed by a
//! closed-form covariance estimate), `dhs` (independent horseshoe) and
//! `mbsp` (matrix-normal horseshoe with a fixed global scale).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainOutput, DrawBlock};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::model::Dataset;
use crate::rng::RngStream;

pub mod config;
pub mod dhs;
pub mod dss;
pub mod geweke;
pub mod mbsp;
pub mod problem;
pub mod ssvs;
pub mod summary;
pub mod twostep;

pub use config::{DhsConfig, DssConfig, IwPrior, McmcSettings, MbspConfig, ScanOrder, SlabPrior, TwoStepConfig};
pub use problem::Problem;
pub use summary::{posterior_summary, PosteriorSummary, Statistic};

/// Initial error covariance is `INIT_SIGMA_SCALE * I`.
pub const INIT_SIGMA_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(alias = "two-step")]
    TwoStep,
    Dss,
    Dhs,
    Mbsp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TwoStep, Method::Dss, Method::Dhs, Method::Mbsp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TwoStep => "twostep",
            Method::Dss => "dss",
            Method::Dhs => "dhs",
            Method::Mbsp => "mbsp",
        }
    }

    /// Stable identifier used when deriving per-method random streams.
    pub fn code(self) -> u64 {
        match self {
            Method::TwoStep => 1,
            Method::Dss => 2,
            Method::Dhs => 3,
            Method::Mbsp => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twostep" | "two-step" => Ok(Method::TwoStep),
            "dss" => Ok(Method::Dss),
            "dhs" => Ok(Method::Dhs),
            "mbsp" => Ok(Method::Mbsp),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}` (expected twostep, dss, dhs or mbsp)"))),
        }
    }
}

/// A Gibbs transition kernel together with its prior.
pub trait GibbsKernel {
    type State: Clone;

    fn method(&self) -> Method;

    fn mcmc(&self) -> &McmcSettings;

    fn initial_state(&self, prob: &Problem) -> Result<Self::State>;

    /// Exact draw of every parameter from the prior.
    fn prior_state(&self, p: usize, q: usize, rng: &mut RngStream) -> Result<Self::State>;

    /// One full systematic sweep over all parameter blocks.
    fn sweep(&self, state: &mut Self::State, prob: &Problem, rng: &mut RngStream) -> Result<()>;

    fn coefficients<'a>(&self, state: &'a Self::State) -> &'a DenseMatrix;

    fn covariance<'a>(&self, state: &'a Self::State) -> &'a SpdMatrix;

    fn new_blocks(&self, p: usize, q: usize, capacity: usize) -> Vec<DrawBlock>;

    fn record(&self, state: &Self::State, blocks: &mut [DrawBlock]);

    /// Scalar functions of the state compared in the Geweke test.
    fn geweke_functions(&self, state: &Self::State) -> Vec<(String, f64)>;
}

/// Runs `kernel` from its initial state and keeps post-burn-in draws.
pub fn run_kernel<K: GibbsKernel>(kernel: &K, prob: &Problem) -> Result<ChainOutput> {
    let mcmc = kernel.mcmc();
    mcmc.validate()?;
    let (p, q) = (prob.p(), prob.q());
    let mut rng = RngStream::new(mcmc.seed);
    let mut state = kernel.initial_state(prob)?;
    let keep = ChainOutput::expected_retained(mcmc.iterations, mcmc.burn_in, mcmc.thin);
    let mut blocks = kernel.new_blocks(p, q, keep);
    for it in 0..mcmc.iterations {
        kernel.sweep(&mut state, prob, &mut rng)?;
        if mcmc.keeps(it) {
            kernel.record(&state, &mut blocks);
        }
    }
    Ok(ChainOutput {
        method: kernel.method().as_str().to_string(),
        seed: mcmc.seed,
        iterations: mcmc.iterations,
        burn_in: mcmc.burn_in,
        thin: mcmc.thin,
        p,
        q,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    #[serde(alias = "two-step")]
    TwoStep(TwoStepConfig),
    Dss(DssConfig),
    Dhs(DhsConfig),
    Mbsp(MbspConfig),
}

impl MethodConfig {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::TwoStep => MethodConfig::TwoStep(TwoStepConfig::default()),
            Method::Dss => MethodConfig::Dss(DssConfig::default()),
            Method::Dhs => MethodConfig::Dhs(DhsConfig::default()),
            Method::Mbsp => MethodConfig::Mbsp(MbspConfig::default()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MethodConfig::TwoStep(_) => Method::TwoStep,
            MethodConfig::Dss(_) => Method::Dss,
            MethodConfig::Dhs(_) => Method::Dhs,
            MethodConfig::Mbsp(_) => Method::Mbsp,
        }
    }

    pub fn mcmc(&self) -> &McmcSettings {
        match self {
            MethodConfig::TwoStep(c) => &c.mcmc,
            MethodConfig::Dss(c) => &c.mcmc,
            MethodConfig::Dhs(c) => &c.mcmc,
            MethodConfig::Mbsp(c) => &c.mcmc,
        }
    }

    pub fn mcmc_mut(&mut self) -> &mut McmcSettings {
        match self {
            MethodConfig::TwoStep(c) => &mut c.mcmc,
            MethodConfig::Dss(c) => &mut c.mcmc,
            MethodConfig::Dhs(c) => &mut c.mcmc,
            MethodConfig::Mbsp(c) => &mut c.mcmc,
        }
    }
}

/// Output of one estimator on one dataset, on the standardized scale.
#[derive(Debug, Clone)]
pub struct Fit {
    pub method: Method,
    pub chain: ChainOutput,
    pub statistic: Statistic,
    pub coefficients: DenseMatrix,
    pub covariance: DenseMatrix,
    pub covariance_posterior: Option<twostep::CovariancePosterior>,
}

pub fn fit(cfg: &MethodConfig, data: &Dataset, statistic: Statistic) -> Result<Fit> {
    let prob = Problem::from_dataset(data)?;
    fit_problem(cfg, &prob, statistic)
}

pub fn fit_problem(cfg: &MethodConfig, prob: &Problem, statistic: Statistic) -> Result<Fit> {
    let chain = match cfg {
        MethodConfig::TwoStep(c) => twostep::run_twostep_step1(prob, c)?,
        MethodConfig::Dss(c) => dss::run_dss(prob, c)?,
        MethodConfig::Dhs(c) => dhs::run_dhs(prob, c)?,
        MethodConfig::Mbsp(c) => mbsp::run_mbsp(prob, c)?,
    };
    let summary = posterior_summary(&chain, statistic)?;
    let (covariance, covariance_posterior) = match cfg {
        MethodConfig::TwoStep(c) => {
            // step 2 always uses the step-1 posterior mean
            let b_hat = if statistic == Statistic::Mean {
                summary.coefficients.clone()
            } else {
                posterior_summary(&chain, Statistic::Mean)?.coefficients
            };
            let post = twostep::run_twostep_step2(prob, &b_hat, &c.iw)?;
            (post.mean.clone(), Some(post))
        }
        _ => (
            summary.covariance.clone().ok_or_else(|| Error::Data("chain has no covariance draws".into()))?,
            None,
        ),
    };
    Ok(Fit {
        method: cfg.method(),
        chain,
        statistic,
        coefficients: summary.coefficients,
        covariance,
        covariance_posterior,
    })
}

pub(crate) fn check_problem(prob: &Problem) -> Result<()> {
    if prob.p() == 0 || prob.q() == 0 {
        return Err(Error::DimensionMismatch("need at least one predictor and one response".into()));
    }
    Ok(())
}
