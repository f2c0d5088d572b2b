//! Regression model types: datasets with their standardization statistics,
//! and the prediction/residual algebra shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// `p x q` regression coefficients, rows indexed by predictor.
pub type CoefficientMatrix = DenseMatrix;

/// Per-column location and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ColumnStats {
    pub fn identity(cols: usize) -> Self {
        Self { means: vec![0.0; cols], sds: vec![1.0; cols] }
    }

    /// Column means and sample standard deviations (denominator `n - 1`).
    pub fn fit(m: &DenseMatrix, names: &[String]) -> Result<Self> {
        let n = m.nrows();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 rows to standardize, got {n}")));
        }
        let mut means = Vec::with_capacity(m.ncols());
        let mut sds = Vec::with_capacity(m.ncols());
        for (c, col) in m.column_iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                let name = names.get(c).cloned().unwrap_or_else(|| format!("column {}", c + 1));
                return Err(Error::ZeroVariance(name));
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(Self { means, sds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(m.ncols())?;
        Ok(DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] - self.means[j]) / self.sds[j]))
    }

    pub fn invert(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(m.ncols())?;
        Ok(DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * self.sds[j] + self.means[j]))
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.len() {
            return Err(Error::DimensionMismatch(format!("{cols} columns but statistics for {}", self.len())));
        }
        Ok(())
    }
}

/// Standardized design and response matrices plus the statistics used to
/// produce them, so estimates can be mapped back to the original scale.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub x_raw: DenseMatrix,
    pub y_raw: DenseMatrix,
    pub x_stats: ColumnStats,
    pub y_stats: ColumnStats,
    pub predictor_names: Vec<String>,
    pub response_names: Vec<String>,
}

pub fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn check_rows(x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!("X has {} rows but Y has {}", x.nrows(), y.nrows())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dataset entry".into()));
    }
    Ok(())
}

impl Dataset {
    /// Standardizes both matrices by their own column statistics.
    pub fn standardized(x_raw: DenseMatrix, y_raw: DenseMatrix, predictor_names: Vec<String>, response_names: Vec<String>) -> Result<Self> {
        check_rows(&x_raw, &y_raw)?;
        let x_stats = ColumnStats::fit(&x_raw, &predictor_names)?;
        let y_stats = ColumnStats::fit(&y_raw, &response_names)?;
        Self::with_stats(x_raw, y_raw, x_stats, y_stats, predictor_names, response_names)
    }

    /// Applies existing statistics, e.g. training statistics to a test set.
    pub fn with_stats(
        x_raw: DenseMatrix,
        y_raw: DenseMatrix,
        x_stats: ColumnStats,
        y_stats: ColumnStats,
        predictor_names: Vec<String>,
        response_names: Vec<String>,
    ) -> Result<Self> {
        check_rows(&x_raw, &y_raw)?;
        if predictor_names.len() != x_raw.ncols() || response_names.len() != y_raw.ncols() {
            return Err(Error::DimensionMismatch("column names do not match matrix widths".into()));
        }
        let x = x_stats.apply(&x_raw)?;
        let y = y_stats.apply(&y_raw)?;
        Ok(Self { x, y, x_raw, y_raw, x_stats, y_stats, predictor_names, response_names })
    }

    /// Uses the matrices as given (identity statistics).
    pub fn unstandardized(x: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        let (p, q) = (x.ncols(), y.ncols());
        Self::with_stats(x, y, ColumnStats::identity(p), ColumnStats::identity(q), default_names("x", p), default_names("y", q))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }
}

/// `X* B`.
pub fn predict(b: &CoefficientMatrix, x_star: &DenseMatrix) -> Result<DenseMatrix> {
    if x_star.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns but B has {} rows",
            x_star.ncols(),
            b.nrows()
        )));
    }
    Ok(x_star * b)
}

/// Row `i` is `y_i - B^T x_i`.
pub fn residuals(data: &Dataset, b: &CoefficientMatrix) -> Result<DenseMatrix> {
    residuals_of(&data.x, &data.y, b)
}

pub fn residuals_of(x: &DenseMatrix, y: &DenseMatrix, b: &CoefficientMatrix) -> Result<DenseMatrix> {
    if b.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!("B has {} columns but Y has {}", b.ncols(), y.ncols())));
    }
    Ok(y - predict(b, x)?)
}

/// `B_orig[j,k] = B_std[j,k] * sd(y_k) / sd(x_j)`.
pub fn unstandardize_coefficients(b_std: &CoefficientMatrix, x_stats: &ColumnStats, y_stats: &ColumnStats) -> Result<CoefficientMatrix> {
    if x_stats.len() != b_std.nrows() || y_stats.len() != b_std.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "B is {}x{} but statistics cover {} predictors and {} responses",
            b_std.nrows(),
            b_std.ncols(),
            x_stats.len(),
            y_stats.len()
        )));
    }
    Ok(DenseMatrix::from_fn(b_std.nrows(), b_std.ncols(), |j, k| b_std[(j, k)] * y_stats.sds[k] / x_stats.sds[j]))
}

/// Intercept implied on the original scale: `ybar_k - sum_j B_orig[j,k] xbar_j`.
pub fn implied_intercept(b_orig: &CoefficientMatrix, x_stats: &ColumnStats, y_stats: &ColumnStats) -> Vec<f64> {
    (0..b_orig.ncols())
        .map(|k| y_stats.means[k] - (0..b_orig.nrows()).map(|j| b_orig[(j, k)] * x_stats.means[j]).sum::<f64>())
        .collect()
}

/// `D_y Sigma D_y` with `D_y = diag(sd(y))`.
pub fn unstandardize_covariance(sigma_std: &DenseMatrix, y_stats: &ColumnStats) -> Result<DenseMatrix> {
    if sigma_std.nrows() != y_stats.len() || sigma_std.ncols() != y_stats.len() {
        return Err(Error::DimensionMismatch("covariance does not match response statistics".into()));
    }
    Ok(DenseMatrix::from_fn(sigma_std.nrows(), sigma_std.ncols(), |i, j| {
        sigma_std[(i, j)] * y_stats.sds[i] * y_stats.sds[j]
    }))
}

/// Predictions on the original response scale from standardized coefficients.
pub fn predict_original_scale(b_std: &CoefficientMatrix, x_std: &DenseMatrix, y_stats: &ColumnStats) -> Result<DenseMatrix> {
    y_stats.invert(&predict(b_std, x_std)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::dist::standard_normal_matrix;

    fn matmul_oracle(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.nrows(), b.ncols());
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                let mut s = 0.0;
                for k in 0..a.ncols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn predict_cases() {
        let x = DenseMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64);
        assert_eq!(predict(&DenseMatrix::zeros(3, 2), &x).unwrap(), DenseMatrix::zeros(4, 2));
        let b = DenseMatrix::from_fn(3, 2, |i, j| i as f64 - j as f64 * 0.5);
        assert_eq!(predict(&b, &DenseMatrix::identity(3, 3)).unwrap(), b);
        assert!(predict(&b, &DenseMatrix::zeros(4, 2)).is_err());

        let mut rng = RngStream::new(4);
        let x = standard_normal_matrix(5, 3, &mut rng);
        let b = standard_normal_matrix(3, 2, &mut rng);
        let diff = predict(&b, &x).unwrap() - matmul_oracle(&x, &b);
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn residual_cases() {
        let mut rng = RngStream::new(5);
        let x = standard_normal_matrix(6, 3, &mut rng);
        let b = standard_normal_matrix(3, 2, &mut rng);
        let y = &x * &b;
        let data = Dataset::unstandardized(x.clone(), y.clone()).unwrap();
        assert_eq!(residuals(&data, &DenseMatrix::zeros(3, 2)).unwrap(), y);
        assert!(residuals(&data, &b).unwrap().amax() < 1e-12);

        let y2 = standard_normal_matrix(6, 2, &mut rng);
        let data = Dataset::unstandardized(x.clone(), y2.clone()).unwrap();
        let r = residuals(&data, &b).unwrap();
        let oracle = &y2 - matmul_oracle(&x, &b);
        assert!((&r - oracle).amax() < 1e-12);
        // residuals + predictions reproduce Y exactly
        assert!((r + predict(&b, &x).unwrap() - &y2).amax() < 1e-14);
        assert!(residuals(&data, &DenseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn standardize_column() {
        let x = DenseMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let stats = ColumnStats::fit(&x, &["a".into()]).unwrap();
        assert_eq!(stats.apply(&x).unwrap(), DenseMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 1.0]));
        let c = DenseMatrix::from_element(4, 1, 3.0);
        match ColumnStats::fit(&c, &["flat".into()]) {
            Err(Error::ZeroVariance(name)) => assert_eq!(name, "flat"),
            other => panic!("expected zero variance, got {other:?}"),
        }
    }

    #[test]
    fn unstandardize_simple() {
        let unit = ColumnStats::identity(2);
        let b = DenseMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(unstandardize_coefficients(&b, &unit, &unit).unwrap(), b);
        let xs = ColumnStats { means: vec![0.0], sds: vec![4.0] };
        let ys = ColumnStats { means: vec![0.0], sds: vec![2.0] };
        let one = DenseMatrix::from_element(1, 1, 1.0);
        assert_eq!(unstandardize_coefficients(&one, &xs, &ys).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn two_path_prediction_equivalence() {
        let mut rng = RngStream::new(12);
        let x_raw = standard_normal_matrix(30, 4, &mut rng).map(|v| 3.0 * v + 2.0);
        let y_raw = standard_normal_matrix(30, 2, &mut rng).map(|v| 0.5 * v - 1.0);
        let data = Dataset::standardized(x_raw.clone(), y_raw, default_names("x", 4), default_names("y", 2)).unwrap();
        let b_std = standard_normal_matrix(4, 2, &mut rng);
        let via_std = predict_original_scale(&b_std, &data.x, &data.y_stats).unwrap();
        let b_orig = unstandardize_coefficients(&b_std, &data.x_stats, &data.y_stats).unwrap();
        let icpt = implied_intercept(&b_orig, &data.x_stats, &data.y_stats);
        let mut via_raw = &x_raw * &b_orig;
        for mut row in via_raw.row_iter_mut() {
            for k in 0..2 {
                row[k] += icpt[k];
            }
        }
        assert!((via_std - via_raw).amax() < 1e-10);
    }
}
