use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chain length, burn-in, thinning and seed shared by every sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self { iterations: 10_000, burn_in: 100, thin: 1, seed: 0 }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in) % self.thin == 0
    }
}

/// Inverse-Wishart prior `IW(df, multiplier * I)` on the error covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IwPrior {
    /// Defaults to `q + 2`.
    pub iw_df: Option<f64>,
    pub iw_scale_multiplier: f64,
}

impl Default for IwPrior {
    fn default() -> Self {
        Self { iw_df: None, iw_scale_multiplier: 0.5 }
    }
}

impl IwPrior {
    pub fn df(&self, q: usize) -> f64 {
        self.iw_df.unwrap_or(q as f64 + 2.0)
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        let df = self.df(q);
        if !(df > q as f64 - 1.0) {
            return Err(Error::InvalidParameter(format!("iw_df = {df} must exceed q - 1 = {}", q as f64 - 1.0)));
        }
        if !(self.iw_scale_multiplier > 0.0) {
            return Err(Error::InvalidParameter("iw_scale_multiplier must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOrder {
    /// j = 1..p, k = 1..q every iteration.
    #[default]
    Systematic,
    /// p*q sites drawn uniformly with replacement.
    Random,
}

/// Point-mass spike at zero, `N(0, slab_variance)` slab, inclusion probability `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlabPrior {
    pub slab_variance: f64,
    pub inclusion_probability: f64,
}

impl Default for SlabPrior {
    fn default() -> Self {
        Self { slab_variance: 1.0, inclusion_probability: 0.5 }
    }
}

impl SlabPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.slab_variance > 0.0) {
            return Err(Error::InvalidParameter("slab_variance must be positive".into()));
        }
        let pi = self.inclusion_probability;
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidParameter(format!("inclusion probability must lie in (0, 1), got {pi}")));
        }
        Ok(())
    }

    pub fn log_prior_odds(&self) -> f64 {
        let pi = self.inclusion_probability;
        pi.ln() - (1.0 - pi).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DssConfig {
    #[serde(flatten)]
    pub iw: IwPrior,
    #[serde(flatten)]
    pub slab: SlabPrior,
    pub scan: ScanOrder,
    #[serde(flatten)]
    pub mcmc: McmcSettings,
}

impl DssConfig {
    pub fn validate(&self, q: usize) -> Result<()> {
        self.iw.validate(q)?;
        self.slab.validate()?;
        self.mcmc.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoStepConfig {
    /// Shape of the Gamma prior on each response precision `1 / sigma_k^2`.
    pub precision_shape: f64,
    /// Rate of the Gamma prior on each response precision.
    pub precision_rate: f64,
    #[serde(flatten)]
    pub slab: SlabPrior,
    /// Prior for the closed-form covariance step.
    #[serde(flatten)]
    pub iw: IwPrior,
    pub scan: ScanOrder,
    #[serde(flatten)]
    pub mcmc: McmcSettings,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        Self {
            precision_shape: 1.5,
            precision_rate: 0.25,
            slab: SlabPrior::default(),
            iw: IwPrior::default(),
            scan: ScanOrder::default(),
            mcmc: McmcSettings::default(),
        }
    }
}

impl TwoStepConfig {
    pub fn validate(&self, q: usize) -> Result<()> {
        if !(self.precision_shape > 0.0 && self.precision_rate > 0.0) {
            return Err(Error::InvalidParameter("precision prior shape and rate must be positive".into()));
        }
        self.iw.validate(q)?;
        self.slab.validate()?;
        self.mcmc.validate()
    }
}

/// Above this many coefficients the horseshoe sampler draws `B` one row at a time.
pub const DEFAULT_JOINT_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DhsConfig {
    #[serde(flatten)]
    pub iw: IwPrior,
    /// Largest `p * q` for which `vec(B)` is drawn jointly.
    pub joint_limit: usize,
    #[serde(flatten)]
    pub mcmc: McmcSettings,
}

impl Default for DhsConfig {
    fn default() -> Self {
        Self { iw: IwPrior::default(), joint_limit: DEFAULT_JOINT_LIMIT, mcmc: McmcSettings::default() }
    }
}

impl DhsConfig {
    pub fn validate(&self, q: usize) -> Result<()> {
        self.iw.validate(q)?;
        self.mcmc.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MbspConfig {
    /// Fixed global shrinkage; defaults to `1 / (p sqrt(n log n))`.
    pub global_tau: Option<f64>,
    #[serde(flatten)]
    pub iw: IwPrior,
    #[serde(flatten)]
    pub mcmc: McmcSettings,
}

/// `1 / (p sqrt(n log n))`.
pub fn default_global_tau(n: usize, p: usize) -> f64 {
    let n = n as f64;
    1.0 / (p as f64 * (n * n.ln()).sqrt())
}

impl MbspConfig {
    pub fn tau(&self, n: usize, p: usize) -> f64 {
        self.global_tau.unwrap_or_else(|| default_global_tau(n, p))
    }

    pub fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        let tau = self.tau(n, p);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("global_tau must be positive and finite, got {tau}")));
        }
        self.iw.validate(q)?;
        self.mcmc.validate()
    }
}
