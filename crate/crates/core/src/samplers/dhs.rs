//! Independent horseshoe: `B[j,k] ~ N(0, xi[j,k] tau[k])` with half-Cauchy
//! priors on `sqrt(xi)` and `sqrt(tau)`, unstructured error covariance.

use nalgebra::DVector;

use crate::chain::{ChainOutput, DrawBlock, BLOCK_B, BLOCK_SIGMA, BLOCK_TAU, BLOCK_XI};
use crate::dist::{sample_inverse_wishart, standard_normal, HalfCauchySq};
use crate::error::Result;
use crate::linalg::{chol_solve, cholesky, lower_tr_solve_vec, DenseMatrix, SpdMatrix};
use crate::rng::RngStream;
use crate::samplers::config::DhsConfig;
use crate::samplers::dss::dss_update_sigma;
use crate::samplers::problem::Problem;
use crate::samplers::{check_problem, run_kernel, GibbsKernel, McmcSettings, Method, INIT_SIGMA_SCALE};

#[derive(Debug, Clone)]
pub struct DhsState {
    pub b: DenseMatrix,
    /// Local scales, row-major `p x q`.
    pub xi: Vec<HalfCauchySq>,
    /// Per-response global scales.
    pub tau: Vec<HalfCauchySq>,
    pub sigma: SpdMatrix,
}

impl DhsState {
    fn prior_variance(&self, j: usize, k: usize) -> f64 {
        self.xi[j * self.b.ncols() + k].value * self.tau[k].value
    }
}

/// Joint draw of `vec(B)` (column-major, index `k p + j`) from
/// `N(Q^-1 r, Q^-1)` with `Q = Omega (x) X^T X + diag(1 / (xi tau))` and
/// `r = vec(X^T Y Omega)`.
pub fn draw_coefficients_joint(state: &mut DhsState, omega: &DenseMatrix, prob: &Problem, rng: &mut RngStream) -> Result<()> {
    let (p, q) = (prob.p(), prob.q());
    let d = p * q;
    let g = prob.gram();
    let mut prec = DenseMatrix::zeros(d, d);
    for l in 0..q {
        for k in 0..q {
            let w = omega[(k, l)];
            for i in 0..p {
                for j in 0..p {
                    prec[(k * p + j, l * p + i)] = w * g[(j, i)];
                }
            }
        }
    }
    for k in 0..q {
        for j in 0..p {
            prec[(k * p + j, k * p + j)] += 1.0 / state.prior_variance(j, k);
        }
    }
    let rhs = prob.cross() * omega;
    let rhs = DenseMatrix::from_column_slice(d, 1, rhs.as_slice());
    let l = cholesky(&prec)?;
    let mean = chol_solve(&l, &rhs);
    let z = DVector::from_fn(d, |_, _| standard_normal(rng));
    let noise = lower_tr_solve_vec(&l, &z);
    for k in 0..q {
        for j in 0..p {
            state.b[(j, k)] = mean[k * p + j] + noise[k * p + j];
        }
    }
    Ok(())
}

/// Row-by-row draw of `B`, each row `q`-variate normal given the others.
pub fn draw_coefficients_by_row(state: &mut DhsState, omega: &DenseMatrix, prob: &Problem, rng: &mut RngStream) -> Result<()> {
    let (p, q) = (prob.p(), prob.q());
    let g = prob.gram();
    let c = prob.cross();
    for j in 0..p {
        // X_j^T (Y - X_{-j} B_{-j}) as a row vector
        let mut partial = c.row(j).into_owned();
        for i in 0..p {
            if i != j {
                partial -= state.b.row(i) * g[(j, i)];
            }
        }
        let rhs = DenseMatrix::from_iterator(q, 1, (partial * omega).iter().copied());
        let mut prec = omega * g[(j, j)];
        for k in 0..q {
            prec[(k, k)] += 1.0 / state.prior_variance(j, k);
        }
        let l = cholesky(&prec)?;
        let mean = chol_solve(&l, &rhs);
        let z = DVector::from_fn(q, |_, _| standard_normal(rng));
        let noise = lower_tr_solve_vec(&l, &z);
        for k in 0..q {
            state.b[(j, k)] = mean[k] + noise[k];
        }
    }
    Ok(())
}

pub struct DhsKernel {
    pub cfg: DhsConfig,
}

impl GibbsKernel for DhsKernel {
    type State = DhsState;

    fn method(&self) -> Method {
        Method::Dhs
    }

    fn mcmc(&self) -> &McmcSettings {
        &self.cfg.mcmc
    }

    fn initial_state(&self, prob: &Problem) -> Result<DhsState> {
        let (p, q) = (prob.p(), prob.q());
        Ok(DhsState {
            b: DenseMatrix::zeros(p, q),
            xi: vec![HalfCauchySq::default(); p * q],
            tau: vec![HalfCauchySq::default(); q],
            sigma: SpdMatrix::scaled_identity(q, INIT_SIGMA_SCALE)?,
        })
    }

    fn prior_state(&self, p: usize, q: usize, rng: &mut RngStream) -> Result<DhsState> {
        let scale = SpdMatrix::scaled_identity(q, self.cfg.iw.iw_scale_multiplier)?;
        let sigma = sample_inverse_wishart(self.cfg.iw.df(q), &scale, rng)?;
        let tau = (0..q).map(|_| HalfCauchySq::from_prior(rng)).collect::<Result<Vec<_>>>()?;
        let xi = (0..p * q).map(|_| HalfCauchySq::from_prior(rng)).collect::<Result<Vec<_>>>()?;
        let mut state = DhsState { b: DenseMatrix::zeros(p, q), xi, tau, sigma };
        for j in 0..p {
            for k in 0..q {
                state.b[(j, k)] = state.prior_variance(j, k).sqrt() * standard_normal(rng);
            }
        }
        Ok(state)
    }

    fn sweep(&self, state: &mut DhsState, prob: &Problem, rng: &mut RngStream) -> Result<()> {
        let (p, q) = (prob.p(), prob.q());
        let omega = state.sigma.inverse();
        if p * q <= self.cfg.joint_limit {
            draw_coefficients_joint(state, &omega, prob, rng)?;
        } else {
            draw_coefficients_by_row(state, &omega, prob, rng)?;
        }
        for j in 0..p {
            for k in 0..q {
                let bjk = state.b[(j, k)];
                let tau = state.tau[k].value;
                state.xi[j * q + k].update(1, 0.5 * bjk * bjk / tau, rng)?;
            }
        }
        for k in 0..q {
            let half_ssq: f64 = (0..p).map(|j| 0.5 * state.b[(j, k)].powi(2) / state.xi[j * q + k].value).sum();
            state.tau[k].update(p, half_ssq, rng)?;
        }
        state.sigma = dss_update_sigma(&state.b, prob, &self.cfg.iw, rng)?;
        Ok(())
    }

    fn coefficients<'a>(&self, state: &'a DhsState) -> &'a DenseMatrix {
        &state.b
    }

    fn covariance<'a>(&self, state: &'a DhsState) -> &'a SpdMatrix {
        &state.sigma
    }

    fn new_blocks(&self, p: usize, q: usize, capacity: usize) -> Vec<DrawBlock> {
        vec![
            DrawBlock::with_capacity(BLOCK_B, p, q, capacity),
            DrawBlock::with_capacity(BLOCK_SIGMA, q, q, capacity),
            DrawBlock::with_capacity(BLOCK_XI, p, q, capacity),
            DrawBlock::with_capacity(BLOCK_TAU, 1, q, capacity),
        ]
    }

    fn record(&self, state: &DhsState, blocks: &mut [DrawBlock]) {
        blocks[0].push(&state.b);
        blocks[1].push(state.sigma.matrix());
        let xi: Vec<f64> = state.xi.iter().map(|s| s.value).collect();
        blocks[2].push_slice(&xi);
        let tau: Vec<f64> = state.tau.iter().map(|s| s.value).collect();
        blocks[3].push_slice(&tau);
    }

    fn geweke_functions(&self, state: &DhsState) -> Vec<(String, f64)> {
        let (p, q) = state.b.shape();
        let mut out = super::geweke::heavy_tailed_coefficient_functions(&state.b);
        for k in 0..q {
            out.push((format!("tau[{k}] < 1"), if state.tau[k].value < 1.0 { 1.0 } else { 0.0 }));
        }
        for j in 0..p {
            out.push((format!("xi[{j},0] < 1"), if state.xi[j * q].value < 1.0 { 1.0 } else { 0.0 }));
        }
        out.extend(super::geweke::covariance_functions(state.sigma.matrix()));
        out
    }
}

/// Gibbs over `B`, the local and global scales, and `Sigma`.
pub fn run_dhs(prob: &Problem, cfg: &DhsConfig) -> Result<ChainOutput> {
    check_problem(prob)?;
    cfg.validate(prob.q())?;
    run_kernel(&DhsKernel { cfg: cfg.clone() }, prob)
}
