//! Synthetic data: AR(1)-correlated predictors, two active rows in `B` and
//! strongly equicorrelated errors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::standard_normal_matrix;
use crate::error::{Error, Result};
use crate::linalg::{ar1_covariance, equicorrelation, DenseMatrix};
use crate::model::{default_names, ColumnStats, CoefficientMatrix, Dataset};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDesign {
    pub n: usize,
    pub n_test: usize,
    pub p: usize,
    pub q: usize,
    pub rho_x: f64,
    pub rho_eps: f64,
    /// Row-major `p x q`; `None` means [`default_true_b`].
    pub b_true: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    /// Standardize by the training statistics (the test set reuses them).
    pub standardize: bool,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self { n: 40, n_test: 40, p: 10, q: 4, rho_x: 0.7, rho_eps: 0.9, b_true: None, seed: 1, standardize: true }
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {}", self.n)));
        }
        if self.n_test == 0 {
            return Err(Error::InvalidParameter("n_test must be positive".into()));
        }
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be positive".into()));
        }
        ar1_covariance(self.p, self.rho_x)?;
        equicorrelation(self.q, self.rho_eps)?;
        self.true_b()?;
        Ok(())
    }

    pub fn true_b(&self) -> Result<CoefficientMatrix> {
        match &self.b_true {
            None => default_true_b(self.p, self.q),
            Some(rows) => {
                if rows.len() != self.p || rows.iter().any(|r| r.len() != self.q) {
                    return Err(Error::DimensionMismatch(format!("b_true must be {}x{}", self.p, self.q)));
                }
                Ok(DenseMatrix::from_fn(self.p, self.q, |j, k| rows[j][k]))
            }
        }
    }
}

/// First row 1.25, second row -1, remaining rows zero.
pub fn default_true_b(p: usize, q: usize) -> Result<CoefficientMatrix> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2 for the default coefficients, got {p}")));
    }
    Ok(DenseMatrix::from_fn(p, q, |j, _| match j {
        0 => 1.25,
        1 => -1.0,
        _ => 0.0,
    }))
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub train: Dataset,
    pub test: Dataset,
    pub b_true: CoefficientMatrix,
    pub sigma_true: DenseMatrix,
}

fn draw(n: usize, lx: &DenseMatrix, le: &DenseMatrix, b: &DenseMatrix, rng: &mut RngStream) -> (DenseMatrix, DenseMatrix) {
    let x = standard_normal_matrix(n, lx.nrows(), rng) * lx.transpose();
    let e = standard_normal_matrix(n, le.nrows(), rng) * le.transpose();
    let y = &x * b + e;
    (x, y)
}

/// Training and test sets from independent substreams of `design.seed`.
pub fn generate(design: &SimDesign) -> Result<SimData> {
    design.validate()?;
    let b = design.true_b()?;
    let sx = ar1_covariance(design.p, design.rho_x)?;
    let se = equicorrelation(design.q, design.rho_eps)?;
    let mut train_rng = RngStream::derive(design.seed, &[0]);
    let mut test_rng = RngStream::derive(design.seed, &[1]);
    let (x, y) = draw(design.n, sx.cholesky(), se.cholesky(), &b, &mut train_rng);
    let (xt, yt) = draw(design.n_test, sx.cholesky(), se.cholesky(), &b, &mut test_rng);
    let pn = default_names("x", design.p);
    let rn = default_names("y", design.q);
    let (xs, ys) = if design.standardize {
        (ColumnStats::fit(&x, &pn)?, ColumnStats::fit(&y, &rn)?)
    } else {
        (ColumnStats::identity(design.p), ColumnStats::identity(design.q))
    };
    let train = Dataset::with_stats(x, y, xs.clone(), ys.clone(), pn.clone(), rn.clone())?;
    let test = Dataset::with_stats(xt, yt, xs, ys, pn, rn)?;
    Ok(SimData { train, test, b_true: b, sigma_true: se.into_matrix() })
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix, names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes raw `x`/`y` matrices for train and test plus `design.json`.
pub fn persist(data: &SimData, design: &SimDesign, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let t = &data.train;
    write_matrix_csv(&dir.join("train_x.csv"), &t.x_raw, &t.predictor_names)?;
    write_matrix_csv(&dir.join("train_y.csv"), &t.y_raw, &t.response_names)?;
    write_matrix_csv(&dir.join("test_x.csv"), &data.test.x_raw, &t.predictor_names)?;
    write_matrix_csv(&dir.join("test_y.csv"), &data.test.y_raw, &t.response_names)?;
    write_matrix_csv(&dir.join("b_true.csv"), &data.b_true, &t.response_names)?;
    fs::write(dir.join("design.json"), serde_json::to_string_pretty(design)? + "\n")?;
    Ok(())
}
