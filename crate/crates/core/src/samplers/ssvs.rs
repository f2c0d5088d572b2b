//! Single-site spike-and-slab update shared by the joint (`dss`) and the
//! per-response (`twostep`) samplers.
//!
//! With every other coefficient fixed, the log-likelihood in `b = B[j,k]` is
//! `a b - h b^2 / 2` where
//!
//! ```text
//! h = G[j,j] * Omega[k,k]
//! a = (C Omega)[j,k] - (G B Omega)[j,k] + B[j,k] h
//! ```
//!
//! for `G = X^T X`, `C = X^T Y`, `Omega = Sigma^-1`. Integrating `b` against
//! the `N(0, v)` slab gives the log Bayes factor `a^2 / (2P) - log(v P) / 2`
//! with `P = h + 1/v`.

use rand::Rng;

use crate::dist::standard_normal;
use crate::linalg::DenseMatrix;
use crate::samplers::config::SlabPrior;

/// Full conditional of one `(gamma, B)` site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabConditional {
    /// Posterior log odds of inclusion.
    pub log_odds: f64,
    /// Mean of `B[j,k]` given inclusion.
    pub mean: f64,
    /// Precision of `B[j,k]` given inclusion.
    pub precision: f64,
}

impl SlabConditional {
    pub fn inclusion_probability(&self) -> f64 {
        logistic(self.log_odds)
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Coefficients, inclusion indicators and the caches the site update needs.
#[derive(Debug, Clone)]
pub struct SsvsBlock {
    pub b: DenseMatrix,
    pub gamma: Vec<bool>,
    omega: DenseMatrix,
    gb: DenseMatrix,
    c_omega: DenseMatrix,
}

impl SsvsBlock {
    pub fn zeros(p: usize, m: usize) -> Self {
        Self {
            b: DenseMatrix::zeros(p, m),
            gamma: vec![false; p * m],
            omega: DenseMatrix::identity(m, m),
            gb: DenseMatrix::zeros(p, m),
            c_omega: DenseMatrix::zeros(p, m),
        }
    }

    pub fn from_parts(b: DenseMatrix, gamma: Vec<bool>) -> Self {
        let (p, m) = b.shape();
        debug_assert_eq!(gamma.len(), p * m);
        Self { b, gamma, omega: DenseMatrix::identity(m, m), gb: DenseMatrix::zeros(p, m), c_omega: DenseMatrix::zeros(p, m) }
    }

    pub fn cols(&self) -> usize {
        self.b.ncols()
    }

    pub fn included(&self, j: usize, k: usize) -> bool {
        self.gamma[j * self.cols() + k]
    }

    pub fn gamma_matrix(&self) -> DenseMatrix {
        let (p, m) = self.b.shape();
        DenseMatrix::from_fn(p, m, |j, k| if self.included(j, k) { 1.0 } else { 0.0 })
    }

    /// Installs a new error precision and rebuilds every cache from scratch.
    pub fn refresh(&mut self, omega: DenseMatrix, gram: &DenseMatrix, cross: &DenseMatrix) {
        self.c_omega = cross * &omega;
        self.gb = gram * &self.b;
        self.omega = omega;
    }

    pub fn conditional(&self, j: usize, k: usize, gram: &DenseMatrix, prior: &SlabPrior) -> SlabConditional {
        let m = self.cols();
        let okk = self.omega[(k, k)];
        let h = gram[(j, j)] * okk;
        let mut gbo = 0.0;
        for l in 0..m {
            gbo += self.gb[(j, l)] * self.omega[(l, k)];
        }
        let a = self.c_omega[(j, k)] - gbo + self.b[(j, k)] * h;
        let v = prior.slab_variance;
        let precision = h + 1.0 / v;
        let log_bf = 0.5 * a * a / precision - 0.5 * (v * precision).ln();
        SlabConditional { log_odds: prior.log_prior_odds() + log_bf, mean: a / precision, precision }
    }

    /// Draws `gamma[j,k]` with `B[j,k]` integrated out, then `B[j,k]` given `gamma`.
    pub fn update<R: Rng + ?Sized>(&mut self, j: usize, k: usize, gram: &DenseMatrix, prior: &SlabPrior, rng: &mut R) -> (bool, f64) {
        let cond = self.conditional(j, k, gram, prior);
        debug_assert!(cond.log_odds.is_finite(), "non-finite inclusion log odds at ({j},{k})");
        let u: f64 = rng.random();
        let include = u < cond.inclusion_probability();
        let value = if include { cond.mean + standard_normal(rng) / cond.precision.sqrt() } else { 0.0 };
        let delta = value - self.b[(j, k)];
        if delta != 0.0 {
            for i in 0..self.gb.nrows() {
                self.gb[(i, k)] += delta * gram[(i, j)];
            }
        }
        self.b[(j, k)] = value;
        let m = self.cols();
        self.gamma[j * m + k] = include;
        (include, value)
    }
}
