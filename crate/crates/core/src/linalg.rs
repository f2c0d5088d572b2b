//! Dense linear algebra used by the samplers: a validated SPD matrix type,
//! Cholesky with a single jittered retry, and the covariance constructors
//! of the simulation design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// General dense matrix. All entries are expected to be finite.
pub type DenseMatrix = DMatrix<f64>;

/// Relative tolerance for the symmetry check on [`SpdMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Multiplier on `trace / dim` added to the diagonal on the retry pass.
pub const JITTER_SCALE: f64 = 1e-10;

/// Symmetric positive-definite matrix together with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DenseMatrix,
    chol: DenseMatrix,
}

impl SpdMatrix {
    pub fn new(mat: DenseMatrix) -> Result<Self> {
        let chol = cholesky(&mat)?;
        Ok(Self { mat, chol })
    }

    /// Builds `factor * factor^T`, symmetrized, and validates it.
    pub fn from_factor(factor: &DenseMatrix) -> Result<Self> {
        let mut m = factor * factor.transpose();
        symmetrize(&mut m);
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DenseMatrix::identity(dim, dim), chol: DenseMatrix::identity(dim, dim) }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DenseMatrix::identity(dim, dim) * scale)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.mat
    }

    /// Lower-triangular `L` with `L L^T` equal to the matrix (up to jitter).
    pub fn cholesky(&self) -> &DenseMatrix {
        &self.chol
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let linv = self
            .chol
            .solve_lower_triangular(&DenseMatrix::identity(n, n))
            .expect("cholesky factor has a positive diagonal");
        let mut inv = linv.transpose() * linv;
        symmetrize(&mut inv);
        inv
    }
}

pub fn symmetrize(m: &mut DenseMatrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {bad}")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

fn cholesky_once(m: &DenseMatrix, jitter: f64) -> Result<DenseMatrix> {
    let n = m.nrows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Lower Cholesky factor of a symmetric matrix.
///
/// On failure the factorization is retried once with `1e-10 * trace / dim`
/// added to the diagonal; a second failure is reported as
/// [`Error::NotPositiveDefinite`].
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    check_symmetric(m)?;
    match cholesky_once(m, 0.0) {
        Ok(l) => Ok(l),
        Err(first) => {
            let n = m.nrows();
            let jitter = JITTER_SCALE * m.trace() / n as f64;
            if !(jitter > 0.0) {
                return Err(first);
            }
            cholesky_once(m, jitter)
        }
    }
}

/// Solves `(L L^T) x = b` given the lower factor `L`.
pub fn chol_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let y = l.solve_lower_triangular(b).expect("nonsingular factor");
    l.tr_solve_lower_triangular(&y).expect("nonsingular factor")
}

/// Solves `L^T x = b`.
pub fn lower_tr_solve_vec(l: &DenseMatrix, b: &DVector<f64>) -> DVector<f64> {
    l.tr_solve_lower_triangular(b).expect("nonsingular factor")
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// AR(1) correlation matrix with entry `(i, j) = rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Result<SpdMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("AR(1) dimension must be positive".into()));
    }
    let m = DenseMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32));
    SpdMatrix::new(m)
}

/// Unit diagonal with common off-diagonal `r`.
pub fn equicorrelation(q: usize, r: f64) -> Result<SpdMatrix> {
    if q == 0 {
        return Err(Error::InvalidParameter("equicorrelation dimension must be positive".into()));
    }
    let lower = if q > 1 { -1.0 / (q as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(r > lower && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "equicorrelation {r} outside the positive-definite range ({lower}, 1) for dimension {q}"
        )));
    }
    let m = DenseMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { r });
    SpdMatrix::new(m)
}
