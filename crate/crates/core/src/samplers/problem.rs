use crate::error::{Error, Result};
use crate::linalg::{symmetrize, DenseMatrix};
use crate::model::Dataset;

/// Design and response matrices with the sufficient statistics the Gibbs
/// kernels reuse every sweep: `X^T X` and `X^T Y`.
#[derive(Debug, Clone)]
pub struct Problem {
    x: DenseMatrix,
    y: DenseMatrix,
    gram: DenseMatrix,
    cross: DenseMatrix,
}

impl Problem {
    /// Zero-row inputs are allowed; the likelihood then contributes nothing.
    pub fn new(x: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!("X has {} rows but Y has {}", x.nrows(), y.nrows())));
        }
        let mut gram = x.transpose() * &x;
        symmetrize(&mut gram);
        let cross = x.transpose() * &y;
        Ok(Self { x, y, gram, cross })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        Self::new(data.x.clone(), data.y.clone())
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

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn cross(&self) -> &DenseMatrix {
        &self.cross
    }

    /// Replaces the responses, keeping the design.
    pub fn set_y(&mut self, y: DenseMatrix) {
        debug_assert_eq!(y.shape(), self.y.shape());
        self.cross = self.x.transpose() * &y;
        self.y = y;
    }

    /// `(Y - XB)^T (Y - XB)`, computed from explicit residuals.
    pub fn residual_crossprod(&self, b: &DenseMatrix) -> DenseMatrix {
        let e = &self.y - &self.x * b;
        let mut s = e.transpose() * e;
        symmetrize(&mut s);
        s
    }

    /// Single-response view for column `k`.
    pub fn column(&self, k: usize) -> Problem {
        Problem {
            x: self.x.clone(),
            y: self.y.columns(k, 1).into_owned(),
            gram: self.gram.clone(),
            cross: self.cross.columns(k, 1).into_owned(),
        }
    }
}
