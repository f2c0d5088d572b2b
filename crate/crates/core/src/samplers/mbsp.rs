//! Matrix-normal global-local shrinkage with the horseshoe local prior:
//! `B | psi, Sigma ~ MN(0, tau diag(psi), Sigma)` with `tau` fixed and
//! `sqrt(psi_j) ~ C+(0, 1)`.

use crate::chain::{ChainOutput, DrawBlock, BLOCK_B, BLOCK_PSI, BLOCK_SIGMA};
use crate::dist::{sample_inverse_wishart, standard_normal_matrix, HalfCauchySq};
use crate::error::Result;
use crate::linalg::{chol_solve, cholesky, symmetrize, DenseMatrix, SpdMatrix};
use crate::rng::RngStream;
use crate::samplers::config::MbspConfig;
use crate::samplers::problem::Problem;
use crate::samplers::{check_problem, run_kernel, GibbsKernel, McmcSettings, Method, INIT_SIGMA_SCALE};

#[derive(Debug, Clone)]
pub struct MbspState {
    pub b: DenseMatrix,
    pub psi: Vec<HalfCauchySq>,
    pub sigma: SpdMatrix,
}

/// Draws `B ~ MN((G + D^-1)^-1 X^T Y, (G + D^-1)^-1, Sigma)` with `D = tau diag(psi)`.
pub fn draw_coefficients(state: &mut MbspState, tau: f64, prob: &Problem, rng: &mut RngStream) -> Result<()> {
    let (p, q) = (prob.p(), prob.q());
    let mut row_prec = prob.gram().clone();
    for j in 0..p {
        row_prec[(j, j)] += 1.0 / (tau * state.psi[j].value);
    }
    let l = cholesky(&row_prec)?;
    let mean = chol_solve(&l, prob.cross());
    let z = standard_normal_matrix(p, q, rng);
    let row_noise = l.tr_solve_lower_triangular(&z).expect("nonsingular factor");
    state.b = mean + row_noise * state.sigma.cholesky().transpose();
    Ok(())
}

/// `B^T D^-1 B`.
fn prior_crossprod(b: &DenseMatrix, psi: &[HalfCauchySq], tau: f64) -> DenseMatrix {
    let (p, q) = b.shape();
    let mut out = DenseMatrix::zeros(q, q);
    for j in 0..p {
        let w = 1.0 / (tau * psi[j].value);
        for k in 0..q {
            for l in 0..q {
                out[(k, l)] += w * b[(j, k)] * b[(j, l)];
            }
        }
    }
    symmetrize(&mut out);
    out
}

pub struct MbspKernel {
    pub cfg: MbspConfig,
    pub tau: f64,
}

impl MbspKernel {
    pub fn new(cfg: MbspConfig, n: usize, p: usize) -> Self {
        let tau = cfg.tau(n, p);
        Self { cfg, tau }
    }
}

impl GibbsKernel for MbspKernel {
    type State = MbspState;

    fn method(&self) -> Method {
        Method::Mbsp
    }

    fn mcmc(&self) -> &McmcSettings {
        &self.cfg.mcmc
    }

    fn initial_state(&self, prob: &Problem) -> Result<MbspState> {
        Ok(MbspState {
            b: DenseMatrix::zeros(prob.p(), prob.q()),
            psi: vec![HalfCauchySq::default(); prob.p()],
            sigma: SpdMatrix::scaled_identity(prob.q(), INIT_SIGMA_SCALE)?,
        })
    }

    fn prior_state(&self, p: usize, q: usize, rng: &mut RngStream) -> Result<MbspState> {
        let scale = SpdMatrix::scaled_identity(q, self.cfg.iw.iw_scale_multiplier)?;
        let sigma = sample_inverse_wishart(self.cfg.iw.df(q), &scale, rng)?;
        let psi = (0..p).map(|_| HalfCauchySq::from_prior(rng)).collect::<Result<Vec<_>>>()?;
        let z = standard_normal_matrix(p, q, rng);
        let mut b = z * sigma.cholesky().transpose();
        for j in 0..p {
            let s = (self.tau * psi[j].value).sqrt();
            for k in 0..q {
                b[(j, k)] *= s;
            }
        }
        Ok(MbspState { b, psi, sigma })
    }

    fn sweep(&self, state: &mut MbspState, prob: &Problem, rng: &mut RngStream) -> Result<()> {
        let (n, p, q) = (prob.n(), prob.p(), prob.q());
        draw_coefficients(state, self.tau, prob, rng)?;
        let omega = state.sigma.inverse();
        for j in 0..p {
            let row = state.b.row(j);
            let quad = (row * &omega * row.transpose())[(0, 0)];
            state.psi[j].update(q, 0.5 * quad / self.tau, rng)?;
        }
        let mut scale = prob.residual_crossprod(&state.b) + prior_crossprod(&state.b, &state.psi, self.tau);
        for k in 0..q {
            scale[(k, k)] += self.cfg.iw.iw_scale_multiplier;
        }
        let df = self.cfg.iw.df(q) + (n + p) as f64;
        state.sigma = sample_inverse_wishart(df, &SpdMatrix::new(scale)?, rng)?;
        Ok(())
    }

    fn coefficients<'a>(&self, state: &'a MbspState) -> &'a DenseMatrix {
        &state.b
    }

    fn covariance<'a>(&self, state: &'a MbspState) -> &'a SpdMatrix {
        &state.sigma
    }

    fn new_blocks(&self, p: usize, q: usize, capacity: usize) -> Vec<DrawBlock> {
        vec![
            DrawBlock::with_capacity(BLOCK_B, p, q, capacity),
            DrawBlock::with_capacity(BLOCK_SIGMA, q, q, capacity),
            DrawBlock::with_capacity(BLOCK_PSI, 1, p, capacity),
        ]
    }

    fn record(&self, state: &MbspState, blocks: &mut [DrawBlock]) {
        blocks[0].push(&state.b);
        blocks[1].push(state.sigma.matrix());
        let psi: Vec<f64> = state.psi.iter().map(|s| s.value).collect();
        blocks[2].push_slice(&psi);
    }

    fn geweke_functions(&self, state: &MbspState) -> Vec<(String, f64)> {
        let scaled = &state.b / self.tau.sqrt();
        let mut out = super::geweke::heavy_tailed_coefficient_functions(&scaled);
        for (j, s) in state.psi.iter().enumerate() {
            out.push((format!("psi[{j}] < 1"), if s.value < 1.0 { 1.0 } else { 0.0 }));
        }
        out.extend(super::geweke::covariance_functions(state.sigma.matrix()));
        out
    }
}

/// Gibbs over `B` (matrix-normal), the local scales `psi`, and `Sigma`.
pub fn run_mbsp(prob: &Problem, cfg: &MbspConfig) -> Result<ChainOutput> {
    check_problem(prob)?;
    cfg.validate(prob.n(), prob.p(), prob.q())?;
    run_kernel(&MbspKernel::new(cfg.clone(), prob.n(), prob.p()), prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_matrix_normal_posterior() {
        // psi huge, tau = 1: B | Sigma ~ MN((G + D^-1)^-1 C, (G + D^-1)^-1, Sigma) with D^-1 ~ 0
        let mut rng = RngStream::new(55);
        let (n, p, q) = (8, 3, 2);
        let x = standard_normal_matrix(n, p, &mut rng);
        let y = standard_normal_matrix(n, q, &mut rng);
        let prob = Problem::new(x.clone(), y.clone()).unwrap();
        let sigma = DenseMatrix::from_row_slice(2, 2, &[0.9, 0.4, 0.4, 0.7]);
        let mut st = MbspState {
            b: DenseMatrix::zeros(p, q),
            psi: vec![HalfCauchySq { value: 1e12, aux: 1.0 }; p],
            sigma: SpdMatrix::new(sigma.clone()).unwrap(),
        };
        // oracle: OLS mean, covariance of B[j,k] and B[i,l] = (X^T X)^-1[j,i] Sigma[k,l]
        let ginv = (x.transpose() * &x).try_inverse().unwrap();
        let ols = &ginv * x.transpose() * &y;
        let reps = 100_000;
        let mut m1 = DenseMatrix::zeros(p, q);
        let mut c00_01 = 0.0; // cov(B[0,0], B[0,1])
        let mut v11_1 = 0.0; // var(B[1,1])
        for _ in 0..reps {
            draw_coefficients(&mut st, 1.0, &prob, &mut rng).unwrap();
            m1 += &st.b;
            let d = &st.b - &ols;
            c00_01 += d[(0, 0)] * d[(0, 1)];
            v11_1 += d[(1, 1)] * d[(1, 1)];
        }
        m1 /= reps as f64;
        let tol = |v: f64| 5.0 * (v / reps as f64).sqrt();
        for j in 0..p {
            for k in 0..q {
                assert!((m1[(j, k)] - ols[(j, k)]).abs() < tol(ginv[(j, j)] * sigma[(k, k)]));
            }
        }
        let want_c = ginv[(0, 0)] * sigma[(0, 1)];
        let want_v = ginv[(1, 1)] * sigma[(1, 1)];
        assert!(((c00_01 / reps as f64) - want_c).abs() / want_c.abs() < 0.03);
        assert!(((v11_1 / reps as f64) - want_v).abs() / want_v < 0.03);
    }
}
