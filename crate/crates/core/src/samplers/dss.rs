//! Joint spike-and-slab Gibbs sampler with an unstructured error covariance.

use rand::Rng;

use crate::chain::{ChainOutput, DrawBlock, BLOCK_B, BLOCK_GAMMA, BLOCK_SIGMA};
use crate::dist::{sample_inverse_wishart, standard_normal};
use crate::error::Result;
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::rng::RngStream;
use crate::samplers::config::{DssConfig, IwPrior, ScanOrder};
use crate::samplers::problem::Problem;
use crate::samplers::ssvs::{SlabConditional, SsvsBlock};
use crate::samplers::{check_problem, run_kernel, GibbsKernel, Method, INIT_SIGMA_SCALE};

#[derive(Debug, Clone)]
pub struct DssState {
    pub ssvs: SsvsBlock,
    pub sigma: SpdMatrix,
}

impl DssState {
    pub fn initial(p: usize, q: usize) -> Result<Self> {
        Ok(Self { ssvs: SsvsBlock::zeros(p, q), sigma: SpdMatrix::scaled_identity(q, INIT_SIGMA_SCALE)? })
    }

    pub fn coefficients(&self) -> &DenseMatrix {
        &self.ssvs.b
    }

    /// Rebuilds the cached products after `sigma`, `B` or the data changed.
    pub fn refresh(&mut self, prob: &Problem) {
        let omega = self.sigma.inverse();
        self.ssvs.refresh(omega, prob.gram(), prob.cross());
    }
}

/// Full conditional of site `(j, k)` in the current state. The state must be
/// refreshed against `prob`.
pub fn coefficient_conditional(j: usize, k: usize, state: &DssState, prob: &Problem, cfg: &DssConfig) -> SlabConditional {
    state.ssvs.conditional(j, k, prob.gram(), &cfg.slab)
}

/// Draws `(gamma[j,k], B[j,k])` from their full conditional.
pub fn dss_update_coefficient(
    j: usize,
    k: usize,
    state: &mut DssState,
    prob: &Problem,
    cfg: &DssConfig,
    rng: &mut RngStream,
) -> (bool, f64) {
    state.ssvs.update(j, k, prob.gram(), &cfg.slab, rng)
}

/// Draw from `IW(df + n, multiplier * I + sum_i e_i e_i^T)` with `e_i = y_i - B^T x_i`.
pub fn dss_update_sigma(b: &DenseMatrix, prob: &Problem, prior: &IwPrior, rng: &mut RngStream) -> Result<SpdMatrix> {
    let q = prob.q();
    let mut scale = prob.residual_crossprod(b);
    for i in 0..q {
        scale[(i, i)] += prior.iw_scale_multiplier;
    }
    sample_inverse_wishart(prior.df(q) + prob.n() as f64, &SpdMatrix::new(scale)?, rng)
}

pub struct DssKernel {
    pub cfg: DssConfig,
}

impl GibbsKernel for DssKernel {
    type State = DssState;

    fn method(&self) -> Method {
        Method::Dss
    }

    fn mcmc(&self) -> &crate::samplers::McmcSettings {
        &self.cfg.mcmc
    }

    fn initial_state(&self, prob: &Problem) -> Result<DssState> {
        DssState::initial(prob.p(), prob.q())
    }

    fn prior_state(&self, p: usize, q: usize, rng: &mut RngStream) -> Result<DssState> {
        let scale = SpdMatrix::scaled_identity(q, self.cfg.iw.iw_scale_multiplier)?;
        let sigma = sample_inverse_wishart(self.cfg.iw.df(q), &scale, rng)?;
        let mut b = DenseMatrix::zeros(p, q);
        let mut gamma = vec![false; p * q];
        let sd = self.cfg.slab.slab_variance.sqrt();
        for j in 0..p {
            for k in 0..q {
                let inc = rng.random::<f64>() < self.cfg.slab.inclusion_probability;
                gamma[j * q + k] = inc;
                if inc {
                    b[(j, k)] = sd * standard_normal(rng);
                }
            }
        }
        Ok(DssState { ssvs: SsvsBlock::from_parts(b, gamma), sigma })
    }

    fn sweep(&self, state: &mut DssState, prob: &Problem, rng: &mut RngStream) -> Result<()> {
        let (p, q) = (prob.p(), prob.q());
        state.refresh(prob);
        match self.cfg.scan {
            ScanOrder::Systematic => {
                for j in 0..p {
                    for k in 0..q {
                        dss_update_coefficient(j, k, state, prob, &self.cfg, rng);
                    }
                }
            }
            ScanOrder::Random => {
                for _ in 0..p * q {
                    let site = rng.random_range(0..p * q);
                    dss_update_coefficient(site / q, site % q, state, prob, &self.cfg, rng);
                }
            }
        }
        state.sigma = dss_update_sigma(&state.ssvs.b, prob, &self.cfg.iw, rng)?;
        Ok(())
    }

    fn coefficients<'a>(&self, state: &'a DssState) -> &'a DenseMatrix {
        &state.ssvs.b
    }

    fn covariance<'a>(&self, state: &'a DssState) -> &'a SpdMatrix {
        &state.sigma
    }

    fn new_blocks(&self, p: usize, q: usize, capacity: usize) -> Vec<DrawBlock> {
        vec![
            DrawBlock::with_capacity(BLOCK_B, p, q, capacity),
            DrawBlock::with_capacity(BLOCK_GAMMA, p, q, capacity),
            DrawBlock::with_capacity(BLOCK_SIGMA, q, q, capacity),
        ]
    }

    fn record(&self, state: &DssState, blocks: &mut [DrawBlock]) {
        blocks[0].push(&state.ssvs.b);
        blocks[1].push(&state.ssvs.gamma_matrix());
        blocks[2].push(state.sigma.matrix());
    }

    fn geweke_functions(&self, state: &DssState) -> Vec<(String, f64)> {
        let b = &state.ssvs.b;
        let (p, q) = b.shape();
        let mut out = Vec::new();
        for j in 0..p {
            for k in 0..q {
                out.push((format!("B[{j},{k}]"), b[(j, k)]));
                out.push((format!("B[{j},{k}]^2"), b[(j, k)] * b[(j, k)]));
                out.push((format!("gamma[{j},{k}]"), if state.ssvs.included(j, k) { 1.0 } else { 0.0 }));
            }
        }
        let frac = state.ssvs.gamma.iter().filter(|&&g| g).count() as f64 / (p * q) as f64;
        out.push(("inclusion frequency".into(), frac));
        out.extend(super::geweke::covariance_functions(state.sigma.matrix()));
        out
    }
}

/// Systematic-scan Gibbs: every coefficient site, then `Sigma`, per iteration.
pub fn run_dss(prob: &Problem, cfg: &DssConfig) -> Result<ChainOutput> {
    check_problem(prob)?;
    cfg.validate(prob.q())?;
    run_kernel(&DssKernel { cfg: cfg.clone() }, prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::standard_normal_matrix;
    use crate::samplers::config::SlabPrior;

    fn small_problem(seed: u64, n: usize, p: usize, q: usize) -> Problem {
        let mut rng = RngStream::new(seed);
        let x = standard_normal_matrix(n, p, &mut rng);
        let y = standard_normal_matrix(n, q, &mut rng);
        Problem::new(x, y).unwrap()
    }

    /// Normal density integral by trapezoid over a wide grid.
    fn grid_log_marginal(loglik: impl Fn(f64) -> f64, v: f64, half_width: f64, steps: usize) -> f64 {
        let h = 2.0 * half_width / steps as f64;
        let vals: Vec<f64> = (0..=steps)
            .map(|i| {
                let b = -half_width + i as f64 * h;
                loglik(b) - 0.5 * b * b / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
            })
            .collect();
        let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vals.iter().enumerate().map(|(i, l)| {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * (l - mx).exp()
        }).sum();
        mx + (s * h).ln()
    }

    #[test]
    fn inclusion_probability_matches_two_model_enumeration() {
        // one predictor, one response, known sigma^2 = 0.7
        let x = DenseMatrix::from_column_slice(6, 1, &[0.3, -1.2, 0.8, 1.5, -0.4, -1.0]);
        let y = DenseMatrix::from_column_slice(6, 1, &[0.5, -0.9, 0.2, 1.1, 0.1, -0.6]);
        let sigma2 = 0.7;
        let prob = Problem::new(x.clone(), y.clone()).unwrap();
        let cfg = DssConfig::default();
        let mut st = DssState { ssvs: SsvsBlock::zeros(1, 1), sigma: SpdMatrix::scaled_identity(1, sigma2).unwrap() };
        st.refresh(&prob);
        let cond = coefficient_conditional(0, 0, &st, &prob, &cfg);

        let loglik = |b: f64| -> f64 {
            (0..6).map(|i| {
                let r = y[(i, 0)] - b * x[(i, 0)];
                -0.5 * r * r / sigma2
            }).sum()
        };
        let l0 = loglik(0.0);
        let l1 = grid_log_marginal(&loglik, 1.0, 12.0, 200_000);
        let post = 1.0 / (1.0 + (l0 - l1).exp()); // pi = 1/2
        assert!((cond.inclusion_probability() - post).abs() < 1e-8, "{} vs {post}", cond.inclusion_probability());
    }

    #[test]
    fn site_conditional_matches_grid_integration() {
        // p = 2, q = 2, n = 6 with a correlated Sigma and the other site active
        let prob = small_problem(77, 6, 2, 2);
        let sigma = SpdMatrix::new(DenseMatrix::from_row_slice(2, 2, &[0.8, 0.5, 0.5, 1.1])).unwrap();
        let mut b = DenseMatrix::zeros(2, 2);
        b[(1, 0)] = 0.4;
        b[(0, 1)] = -0.3;
        let gamma = vec![false, true, true, false];
        let mut st = DssState { ssvs: SsvsBlock::from_parts(b.clone(), gamma), sigma: sigma.clone() };
        st.refresh(&prob);
        let cfg = DssConfig::default();
        let (j, k) = (0, 0);

        let omega = sigma.inverse();
        let x = prob.x().clone();
        let y = prob.y().clone();
        let loglik = |v: f64| -> f64 {
            let mut bb = b.clone();
            bb[(j, k)] = v;
            let e = &y - &x * &bb;
            -0.5 * (e.transpose() * &e * &omega).trace()
        };
        let l0 = loglik(0.0);
        let l1 = grid_log_marginal(&loglik, 1.0, 10.0, 100_000);
        let p_incl = 1.0 / (1.0 + (l0 - l1).exp());
        // conditional mean and variance of the slab component by quadrature
        let h = 20.0 / 100_000.0;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=100_000 {
            let v = -10.0 + i as f64 * h;
            let w = (loglik(v) - l0 - 0.5 * v * v).exp();
            z += w;
            m1 += w * v;
            m2 += w * v * v;
        }
        let (mean, var) = (m1 / z, m2 / z - (m1 / z).powi(2));

        let cond = coefficient_conditional(j, k, &st, &prob, &cfg);
        assert!((cond.inclusion_probability() - p_incl).abs() < 1e-7);
        assert!((cond.mean - mean).abs() < 1e-7);
        assert!((1.0 / cond.precision - var).abs() < 1e-7);

        // empirical draws from repeated single-site updates at the fixed rest-of-state
        let mut rng = RngStream::new(5);
        let reps = 200_000;
        let (mut inc, mut s1, mut s2) = (0usize, 0.0, 0.0);
        for _ in 0..reps {
            let mut trial = st.clone();
            let (g, v) = dss_update_coefficient(j, k, &mut trial, &prob, &cfg, &mut rng);
            if g {
                inc += 1;
                s1 += v;
                s2 += v * v;
            } else {
                assert_eq!(v, 0.0);
            }
        }
        let freq = inc as f64 / reps as f64;
        let se = (p_incl * (1.0 - p_incl) / reps as f64).sqrt();
        assert!((freq - p_incl).abs() < 4.0 * se);
        let emp_mean = s1 / inc as f64;
        let emp_var = s2 / inc as f64 - emp_mean * emp_mean;
        assert!((emp_mean - mean).abs() < 4.0 * (var / inc as f64).sqrt());
        assert!((emp_var - var).abs() / var < 0.02);
    }

    #[test]
    fn degenerate_slab_draws_zero() {
        let prob = small_problem(3, 10, 2, 2);
        let cfg = DssConfig { slab: SlabPrior { slab_variance: 1e-14, inclusion_probability: 0.5 }, ..Default::default() };
        let mut st = DssState::initial(2, 2).unwrap();
        st.refresh(&prob);
        let mut rng = RngStream::new(1);
        for _ in 0..100 {
            let (_, v) = dss_update_coefficient(0, 1, &mut st, &prob, &cfg, &mut rng);
            assert!(v.abs() < 1e-5);
        }
    }

    #[test]
    fn sigma_update_with_zero_residuals() {
        let (n, q) = (10, 4);
        let x = DenseMatrix::zeros(n, 3);
        let y = DenseMatrix::zeros(n, q);
        let prob = Problem::new(x, y).unwrap();
        let mut rng = RngStream::new(17);
        let reps = 100_000;
        let mut acc = DenseMatrix::zeros(q, q);
        for _ in 0..reps {
            acc += dss_update_sigma(&DenseMatrix::zeros(3, q), &prob, &IwPrior::default(), &mut rng).unwrap().matrix();
        }
        acc /= reps as f64;
        // IW(16, 0.5 I) has mean 0.5 I / 11
        let target = 0.5 / 11.0;
        for i in 0..q {
            for j in 0..q {
                let t = if i == j { target } else { 0.0 };
                assert!((acc[(i, j)] - t).abs() < 0.02 * target, "({i},{j}) {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn sigma_update_without_data_draws_prior() {
        let q = 2;
        let prob = Problem::new(DenseMatrix::zeros(0, 3), DenseMatrix::zeros(0, q)).unwrap();
        let mut rng = RngStream::new(23);
        // prior IW(4, 0.5 I): P(Sigma_11 < 0.5) = P(IG(1.5, 0.25) < 0.5) = P(Gamma(1.5, 0.25) > 2)
        let reps = 100_000;
        let below = (0..reps)
            .filter(|_| dss_update_sigma(&DenseMatrix::zeros(3, q), &prob, &IwPrior::default(), &mut rng).unwrap().matrix()[(0, 0)] < 0.5)
            .count();
        let mut rng = RngStream::new(24);
        let oracle = (0..reps).filter(|_| crate::dist::sample_gamma(1.5, 0.25, &mut rng).unwrap() > 2.0).count();
        let (a, b) = (below as f64 / reps as f64, oracle as f64 / reps as f64);
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
    }

    #[test]
    fn zero_signal_concentrates_at_zero() {
        let mut rng = RngStream::new(8);
        let x = standard_normal_matrix(40, 3, &mut rng);
        let prob = Problem::new(x, DenseMatrix::zeros(40, 2)).unwrap();
        let cfg = DssConfig { mcmc: crate::samplers::McmcSettings { iterations: 2000, burn_in: 100, thin: 1, seed: 4 }, ..Default::default() };
        let chain = run_dss(&prob, &cfg).unwrap();
        let b = chain.coefficients().unwrap();
        for j in 0..3 {
            for k in 0..2 {
                let s = b.series(j, k);
                let m = s.iter().sum::<f64>() / s.len() as f64;
                let se = crate::eval::mcse_batch_means(&s, 20).unwrap();
                assert!(m.abs() <= 3.0 * se + 1e-12, "B[{j},{k}] mean {m} se {se}");
            }
        }
    }
}
