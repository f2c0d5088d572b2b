//! Samplers for the distributions used by the Gibbs kernels.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SpdMatrix};
use crate::rng::RngStream;

/// Lower clamp for horseshoe-type scale parameters.
pub const SCALE_FLOOR: f64 = 1e-12;
/// Upper clamp for horseshoe-type scale parameters.
pub const SCALE_CEIL: f64 = 1e12;

pub fn clamp_scale(v: f64) -> f64 {
    if v.is_nan() {
        SCALE_CEIL
    } else {
        v.clamp(SCALE_FLOOR, SCALE_CEIL)
    }
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    // column-major fill order, fixed for reproducibility
    DenseMatrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

/// `mean + L z` with `z` a vector of independent standard normals.
pub fn sample_mvnormal(mean: &DVector<f64>, chol: &DenseMatrix, rng: &mut RngStream) -> Result<DVector<f64>> {
    let d = mean.len();
    if chol.nrows() != d || chol.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {d} but the factor is {}x{}",
            chol.nrows(),
            chol.ncols()
        )));
    }
    let z = DVector::from_fn(d, |_, _| standard_normal(rng));
    Ok(mean + chol * z)
}

/// Gamma draw parametrized by shape and rate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma requires shape > 0 and rate > 0, got ({shape}, {rate})")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Inverse-gamma draw: the reciprocal of a Gamma(shape, rate = scale) draw.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / sample_gamma(shape, scale, rng)?)
}

/// Inverse-Wishart draw with mean `scale / (df - dim - 1)` when `df > dim + 1`.
///
/// Uses the Bartlett construction for `W ~ Wishart(df, scale^-1)` and returns
/// `W^-1`. With `scale = U U^T` and Bartlett factor `A`, the inverse is
/// `(U A^-T)(U A^-T)^T`, so `scale` never has to be inverted.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &SpdMatrix, rng: &mut R) -> Result<SpdMatrix> {
    let dim = scale.dim();
    if !(df > dim as f64 - 1.0) || !df.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse-Wishart degrees of freedom {df} must exceed dim - 1 = {}",
            dim as f64 - 1.0
        )));
    }
    let mut a = DenseMatrix::zeros(dim, dim);
    for i in 0..dim {
        let chi2 = sample_gamma(0.5 * (df - i as f64), 0.5, rng)?;
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    let a_inv = a
        .solve_lower_triangular(&DenseMatrix::identity(dim, dim))
        .ok_or_else(|| Error::NonFinite("singular Bartlett factor".into()))?;
    let t = scale.cholesky() * a_inv.transpose();
    SpdMatrix::from_factor(&t)
}

/// Square of a half-Cauchy(0, 1) variable, carried with its inverse-gamma
/// auxiliary: `value | aux ~ IG(1/2, 1/aux)`, `aux ~ IG(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfCauchySq {
    pub value: f64,
    pub aux: f64,
}

impl Default for HalfCauchySq {
    fn default() -> Self {
        Self { value: 1.0, aux: 1.0 }
    }
}

impl HalfCauchySq {
    pub fn from_prior<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let aux = clamp_scale(sample_inverse_gamma(0.5, 1.0, rng)?);
        let value = clamp_scale(sample_inverse_gamma(0.5, 1.0 / aux, rng)?);
        Ok(Self { value, aux })
    }

    /// Conjugate update given `terms` normal observations whose variance is
    /// proportional to `value`, with `half_ssq` the sum of squares over the
    /// remaining variance factor, halved.
    pub fn update<R: Rng + ?Sized>(&mut self, terms: usize, half_ssq: f64, rng: &mut R) -> Result<()> {
        let shape = 0.5 * (terms as f64 + 1.0);
        self.value = clamp_scale(sample_inverse_gamma(shape, 1.0 / self.aux + half_ssq, rng)?);
        self.aux = clamp_scale(sample_inverse_gamma(1.0, 1.0 + 1.0 / self.value, rng)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn mvnormal_degenerate_returns_mean() {
        let mut rng = RngStream::new(1);
        let m = DVector::from_vec(vec![5.0, -2.0]);
        let out = sample_mvnormal(&m, &DenseMatrix::zeros(2, 2), &mut rng).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn mvnormal_dimension_mismatch() {
        let mut rng = RngStream::new(1);
        let m = DVector::from_vec(vec![0.0; 3]);
        assert!(sample_mvnormal(&m, &DenseMatrix::identity(2, 2), &mut rng).is_err());
    }

    #[test]
    fn mvnormal_moments() {
        let mut rng = RngStream::new(11);
        let m = DVector::zeros(2);
        let l = DenseMatrix::identity(2, 2);
        let n = 100_000;
        let mut s = DVector::zeros(2);
        let mut ss = DenseMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = sample_mvnormal(&m, &l, &mut rng).unwrap();
            s += &x;
            ss += &x * x.transpose();
        }
        let mu = s / n as f64;
        let cov = ss / n as f64 - &mu * mu.transpose();
        for i in 0..2 {
            assert!(mu[i].abs() < 0.02);
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mvnormal_deterministic() {
        let m = DVector::from_vec(vec![1.0, 2.0]);
        let l = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        let a = sample_mvnormal(&m, &l, &mut RngStream::new(3)).unwrap();
        let b = sample_mvnormal(&m, &l, &mut RngStream::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_mean() {
        let mut rng = RngStream::new(5);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(1.5, 0.25, &mut rng).unwrap()).collect();
        assert!((mean(&xs) - 6.0).abs() < 0.02 * 6.0);
    }

    #[test]
    fn gamma_exponential_cdf() {
        let mut rng = RngStream::new(6);
        let n = 100_000;
        let below = (0..n).filter(|_| sample_gamma(1.0, 1.0, &mut rng).unwrap() <= 1.0).count();
        let ecdf = below as f64 / n as f64;
        assert!((ecdf - (1.0 - (-1.0f64).exp())).abs() < 0.01);
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        let mut rng = RngStream::new(0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
        let a = sample_gamma(2.0, 3.0, &mut RngStream::new(9)).unwrap();
        let b = sample_gamma(2.0, 3.0, &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inverse_wishart_mean_finite_variance() {
        // IW(12, 0.5 I_4) has mean 0.5 I / 7 and finite variance
        let mut rng = RngStream::new(21);
        let scale = SpdMatrix::scaled_identity(4, 0.5).unwrap();
        let n = 100_000;
        let mut acc = DenseMatrix::zeros(4, 4);
        for _ in 0..n {
            acc += sample_inverse_wishart(12.0, &scale, &mut rng).unwrap().matrix();
        }
        acc /= n as f64;
        let diag = 0.5 / 7.0;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { diag } else { 0.0 };
                assert!((acc[(i, j)] - target).abs() < 0.02 * diag, "entry ({i},{j}) = {}", acc[(i, j)]);
            }
        }
    }

    fn quantiles(mut v: Vec<f64>, probs: &[f64]) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        probs.iter().map(|p| v[(p * v.len() as f64) as usize]).collect()
    }

    #[test]
    fn inverse_wishart_matches_inverted_wishart() {
        // oracle: invert sum_{i<=6} z_i z_i^T with z_i ~ N(0, 2 I_4)
        let mut rng = RngStream::new(99);
        let scale = SpdMatrix::scaled_identity(4, 0.5).unwrap();
        let (mut od, mut oo, mut sd, mut so) = (vec![], vec![], vec![], vec![]);
        for _ in 0..100_000 {
            let z = standard_normal_matrix(6, 4, &mut rng) * 2f64.sqrt();
            let inv = (z.transpose() * z).try_inverse().unwrap();
            od.push(inv[(1, 1)]);
            oo.push(inv[(0, 2)]);
            let s = sample_inverse_wishart(6.0, &scale, &mut rng).unwrap().into_matrix();
            sd.push(s[(1, 1)]);
            so.push(s[(0, 2)]);
        }
        let probs = [0.1, 0.25, 0.5, 0.75, 0.9];
        for (a, b) in [(od, sd), (oo, so)] {
            let (qa, qb) = (quantiles(a, &probs), quantiles(b, &probs));
            for (x, y) in qa.iter().zip(&qb) {
                assert!((x - y).abs() < 0.03 * x.abs().max(0.05), "{qa:?} vs {qb:?}");
            }
        }
    }

    #[test]
    fn inverse_wishart_one_dim_is_inverse_gamma() {
        // IW(3, 2) in one dimension is IG(shape 1.5, scale 1)
        let n = 100_000;
        let scale = SpdMatrix::new(DenseMatrix::from_element(1, 1, 2.0)).unwrap();
        let mut rng = RngStream::new(31);
        let mut iw: Vec<f64> = (0..n).map(|_| sample_inverse_wishart(3.0, &scale, &mut rng).unwrap().matrix()[(0, 0)]).collect();
        let mut rng = RngStream::new(32);
        let mut ig: Vec<f64> = (0..n).map(|_| sample_inverse_gamma(1.5, 1.0, &mut rng).unwrap()).collect();
        iw.sort_by(f64::total_cmp);
        ig.sort_by(f64::total_cmp);
        for &prob in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let i = (prob * n as f64) as usize;
            let (a, b) = (iw[i], ig[i]);
            assert!((a - b).abs() / b < 0.03, "quantile {prob}: {a} vs {b}");
        }
    }

    #[test]
    fn inverse_wishart_output_is_spd_and_checked() {
        let mut rng = RngStream::new(2);
        let scale = SpdMatrix::new(DenseMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5])).unwrap();
        for _ in 0..1000 {
            let s = sample_inverse_wishart(3.5, &scale, &mut rng).unwrap();
            assert!(crate::linalg::cholesky(s.matrix()).is_ok());
        }
        assert!(sample_inverse_wishart(1.9, &scale, &mut rng).is_err());
    }

    #[test]
    fn half_cauchy_prior_median_is_one() {
        // P(C+ < 1) = 1/2, so the squared variable has median 1
        let mut rng = RngStream::new(8);
        let n = 100_000;
        let below = (0..n).filter(|_| HalfCauchySq::from_prior(&mut rng).unwrap().value < 1.0).count();
        assert!((below as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
