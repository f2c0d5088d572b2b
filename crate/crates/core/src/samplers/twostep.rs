//! Two-step estimation: independent spike-and-slab regressions per response
//! with a diagonal error covariance, then a closed-form inverse-Wishart
//! posterior for the full covariance given the step-1 residuals.

use rand::Rng;

use crate::chain::{ChainOutput, DrawBlock, BLOCK_B, BLOCK_GAMMA, BLOCK_SIGMA2};
use crate::dist::sample_gamma;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::RngStream;
use crate::samplers::config::{IwPrior, ScanOrder, TwoStepConfig};
use crate::samplers::problem::Problem;
use crate::samplers::ssvs::SsvsBlock;
use crate::samplers::{check_problem, Method, INIT_SIGMA_SCALE};

/// State of the univariate chain for one response.
#[derive(Debug, Clone)]
pub struct UnivariateState {
    pub ssvs: SsvsBlock,
    pub sigma2: f64,
}

fn univariate_sweep(state: &mut UnivariateState, prob: &Problem, cfg: &TwoStepConfig, rng: &mut RngStream) -> Result<()> {
    let p = prob.p();
    let omega = DenseMatrix::from_element(1, 1, 1.0 / state.sigma2);
    state.ssvs.refresh(omega, prob.gram(), prob.cross());
    match cfg.scan {
        ScanOrder::Systematic => {
            for j in 0..p {
                state.ssvs.update(j, 0, prob.gram(), &cfg.slab, rng);
            }
        }
        ScanOrder::Random => {
            for _ in 0..p {
                let j = rng.random_range(0..p);
                state.ssvs.update(j, 0, prob.gram(), &cfg.slab, rng);
            }
        }
    }
    let rss = prob.residual_crossprod(&state.ssvs.b)[(0, 0)];
    let precision = sample_gamma(cfg.precision_shape + 0.5 * prob.n() as f64, cfg.precision_rate + 0.5 * rss, rng)?;
    state.sigma2 = 1.0 / precision;
    Ok(())
}

struct ColumnDraws {
    b: Vec<f64>,
    gamma: Vec<f64>,
    sigma2: Vec<f64>,
}

fn run_column(prob: &Problem, cfg: &TwoStepConfig, k: usize) -> Result<ColumnDraws> {
    let col = prob.column(k);
    let p = prob.p();
    let mcmc = &cfg.mcmc;
    let keep = ChainOutput::expected_retained(mcmc.iterations, mcmc.burn_in, mcmc.thin);
    let mut rng = RngStream::derive(mcmc.seed, &[k as u64]);
    let mut state = UnivariateState { ssvs: SsvsBlock::zeros(p, 1), sigma2: INIT_SIGMA_SCALE };
    let mut out = ColumnDraws { b: Vec::with_capacity(keep * p), gamma: Vec::with_capacity(keep * p), sigma2: Vec::with_capacity(keep) };
    for it in 0..mcmc.iterations {
        univariate_sweep(&mut state, &col, cfg, &mut rng)?;
        if mcmc.keeps(it) {
            out.b.extend(state.ssvs.b.iter());
            out.gamma.extend(state.ssvs.gamma.iter().map(|&g| if g { 1.0 } else { 0.0 }));
            out.sigma2.push(state.sigma2);
        }
    }
    Ok(out)
}

/// Step 1: `q` independent univariate spike-and-slab chains, response `k`
/// driven by the stream derived from `(seed, k)`.
pub fn run_twostep_step1(prob: &Problem, cfg: &TwoStepConfig) -> Result<ChainOutput> {
    check_problem(prob)?;
    cfg.validate(prob.q())?;
    let (p, q) = (prob.p(), prob.q());
    let columns = (0..q).map(|k| run_column(prob, cfg, k)).collect::<Result<Vec<_>>>()?;
    let keep = columns[0].sigma2.len();
    let mut b = DrawBlock::with_capacity(BLOCK_B, p, q, keep);
    let mut gamma = DrawBlock::with_capacity(BLOCK_GAMMA, p, q, keep);
    let mut sigma2 = DrawBlock::with_capacity(BLOCK_SIGMA2, 1, q, keep);
    let mut row = vec![0.0; p * q];
    let mut row_g = vec![0.0; p * q];
    for t in 0..keep {
        for (k, c) in columns.iter().enumerate() {
            for j in 0..p {
                row[j * q + k] = c.b[t * p + j];
                row_g[j * q + k] = c.gamma[t * p + j];
            }
        }
        b.push_slice(&row);
        gamma.push_slice(&row_g);
        let s: Vec<f64> = columns.iter().map(|c| c.sigma2[t]).collect();
        sigma2.push_slice(&s);
    }
    Ok(ChainOutput {
        method: Method::TwoStep.as_str().to_string(),
        seed: cfg.mcmc.seed,
        iterations: cfg.mcmc.iterations,
        burn_in: cfg.mcmc.burn_in,
        thin: cfg.mcmc.thin,
        p,
        q,
        blocks: vec![b, gamma, sigma2],
    })
}

/// Inverse-Wishart posterior of the error covariance given step-1 residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePosterior {
    pub df: f64,
    pub scale: DenseMatrix,
    /// `scale / (df - q - 1)`; with the default prior this is `(0.5 I + S_n) / (n + 1)`.
    pub mean: DenseMatrix,
}

/// Step 2: residuals `e_i = y_i - B_hat^T x_i`, `S_n = sum e_i e_i^T`,
/// posterior `IW(df + n, multiplier * I + S_n)`. No sampling.
pub fn run_twostep_step2(prob: &Problem, b_hat: &DenseMatrix, prior: &IwPrior) -> Result<CovariancePosterior> {
    let (n, p, q) = (prob.n(), prob.p(), prob.q());
    if b_hat.shape() != (p, q) {
        return Err(Error::DimensionMismatch(format!("B_hat is {:?}, expected ({p}, {q})", b_hat.shape())));
    }
    let mut scale = prob.residual_crossprod(b_hat);
    for i in 0..q {
        scale[(i, i)] += prior.iw_scale_multiplier;
    }
    let df = prior.df(q) + n as f64;
    let denom = df - q as f64 - 1.0;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(format!("posterior mean undefined for df = {df} and q = {q}")));
    }
    let mean = &scale / denom;
    Ok(CovariancePosterior { df, scale, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::standard_normal_matrix;
    use crate::samplers::{dss, DssConfig, McmcSettings};

    #[test]
    fn step2_zero_residuals() {
        let x = DenseMatrix::from_fn(9, 3, |i, j| (i * j) as f64);
        let b = DenseMatrix::from_fn(3, 2, |i, j| i as f64 - j as f64);
        let prob = Problem::new(x.clone(), &x * &b).unwrap();
        let post = run_twostep_step2(&prob, &b, &IwPrior::default()).unwrap();
        assert!((post.mean.clone() - DenseMatrix::identity(2, 2) * 0.05).amax() < 1e-15);
        assert_eq!(post.df, 13.0);
    }

    #[test]
    fn step2_single_residual() {
        let x = DenseMatrix::zeros(1, 1);
        let y = DenseMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let prob = Problem::new(x, y).unwrap();
        let post = run_twostep_step2(&prob, &DenseMatrix::zeros(1, 2), &IwPrior::default()).unwrap();
        assert_eq!(post.mean, DenseMatrix::from_row_slice(2, 2, &[0.75, 0.0, 0.0, 0.25]));
        assert_eq!(post.scale, DenseMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn step2_matches_scalar_loop() {
        let mut rng = RngStream::new(99);
        let (n, p, q) = (17, 4, 3);
        let x = standard_normal_matrix(n, p, &mut rng);
        let y = standard_normal_matrix(n, q, &mut rng);
        let b = standard_normal_matrix(p, q, &mut rng);
        let prob = Problem::new(x.clone(), y.clone()).unwrap();
        let post = run_twostep_step2(&prob, &b, &IwPrior::default()).unwrap();
        let mut oracle = vec![vec![0.0; q]; q];
        for i in 0..n {
            let mut e = vec![0.0; q];
            for k in 0..q {
                e[k] = y[(i, k)];
                for j in 0..p {
                    e[k] -= b[(j, k)] * x[(i, j)];
                }
            }
            for a in 0..q {
                for c in 0..q {
                    oracle[a][c] += e[a] * e[c];
                }
            }
        }
        for a in 0..q {
            for c in 0..q {
                let v = (oracle[a][c] + if a == c { 0.5 } else { 0.0 }) / (n as f64 + 1.0);
                assert!((post.mean[(a, c)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_zeros_track_indicators() {
        let mut rng = RngStream::new(1);
        let x = standard_normal_matrix(30, 4, &mut rng);
        let mut y = standard_normal_matrix(30, 2, &mut rng);
        for i in 0..30 {
            y[(i, 0)] += 0.8 * x[(i, 0)];
        }
        let prob = Problem::new(x, y).unwrap();
        let cfg = TwoStepConfig { mcmc: McmcSettings { iterations: 300, burn_in: 10, thin: 1, seed: 2 }, ..Default::default() };
        let chain = run_twostep_step1(&prob, &cfg).unwrap();
        assert_eq!(chain.retained(), 290);
        let (b, g) = (chain.block(BLOCK_B).unwrap(), chain.block(BLOCK_GAMMA).unwrap());
        for t in 0..chain.retained() {
            let (bt, gt) = (b.draw(t), g.draw(t));
            for (bv, gv) in bt.iter().zip(gt.iter()) {
                assert!(*gv == 0.0 || *gv == 1.0);
                assert_eq!(*gv == 0.0, *bv == 0.0);
            }
        }
    }

    fn quantiles(mut xs: Vec<f64>, probs: &[f64]) -> Vec<f64> {
        xs.sort_by(f64::total_cmp);
        probs.iter().map(|p| xs[((xs.len() - 1) as f64 * p) as usize]).collect()
    }

    #[test]
    fn single_response_matches_joint_sampler() {
        // IG(1.5, 0.25) on sigma^2 coincides with the one-dimensional IW(3, 0.5)
        let mut rng = RngStream::new(314);
        let n = 15;
        let x = standard_normal_matrix(n, 2, &mut rng);
        let mut y = standard_normal_matrix(n, 1, &mut rng) * 0.8;
        for i in 0..n {
            y[(i, 0)] += 0.6 * x[(i, 0)];
        }
        let prob = Problem::new(x, y).unwrap();
        let mcmc = McmcSettings { iterations: 60_000, burn_in: 500, thin: 1, seed: 10 };
        let two = run_twostep_step1(&prob, &TwoStepConfig { mcmc: mcmc.clone(), ..Default::default() }).unwrap();
        let joint = dss::run_dss(&prob, &DssConfig { mcmc: McmcSettings { seed: 11, ..mcmc }, ..Default::default() }).unwrap();
        let probs = [0.1, 0.25, 0.5, 0.75, 0.9];
        let qa = quantiles(two.coefficients().unwrap().series(0, 0), &probs);
        let qb = quantiles(joint.coefficients().unwrap().series(0, 0), &probs);
        for (a, b) in qa.iter().zip(&qb) {
            assert!((a - b).abs() < 0.03, "{qa:?} vs {qb:?}");
        }
        let sa = quantiles(two.block(BLOCK_SIGMA2).unwrap().series(0, 0), &probs);
        let sb = quantiles(joint.block(crate::chain::BLOCK_SIGMA).unwrap().series(0, 0), &probs);
        for (a, b) in sa.iter().zip(&sb) {
            assert!((a - b).abs() / b < 0.03, "{sa:?} vs {sb:?}");
        }
    }
}
