//! Stored MCMC draws and their on-disk layout: one CSV per parameter block
//! (one row per retained draw) and a `meta.json` sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const BLOCK_B: &str = "B";
pub const BLOCK_GAMMA: &str = "gamma";
pub const BLOCK_SIGMA: &str = "Sigma";
pub const BLOCK_SIGMA2: &str = "sigma2";
pub const BLOCK_XI: &str = "xi";
pub const BLOCK_TAU: &str = "tau";
pub const BLOCK_PSI: &str = "psi";

/// Draws of one matrix-valued parameter; each draw is stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    values: Vec<f64>,
}

impl DrawBlock {
    pub fn new(name: &str, rows: usize, cols: usize) -> Self {
        Self { name: name.to_string(), rows, cols, values: Vec::new() }
    }

    pub fn with_capacity(name: &str, rows: usize, cols: usize, draws: usize) -> Self {
        Self { name: name.to_string(), rows, cols, values: Vec::with_capacity(draws * rows * cols) }
    }

    fn width(&self) -> usize {
        self.rows * self.cols
    }

    pub fn push(&mut self, m: &DenseMatrix) {
        debug_assert_eq!((m.nrows(), m.ncols()), (self.rows, self.cols));
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.values.push(m[(i, j)]);
            }
        }
    }

    pub fn push_slice(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.width());
        self.values.extend_from_slice(v);
    }

    pub fn draws(&self) -> usize {
        if self.width() == 0 {
            0
        } else {
            self.values.len() / self.width()
        }
    }

    pub fn draw(&self, t: usize) -> DenseMatrix {
        let w = self.width();
        DenseMatrix::from_row_slice(self.rows, self.cols, &self.values[t * w..(t + 1) * w])
    }

    /// Trace of entry `(i, j)` across draws.
    pub fn series(&self, i: usize, j: usize) -> Vec<f64> {
        let w = self.width();
        let off = i * self.cols + j;
        self.values.iter().skip(off).step_by(w).copied().collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for i in 1..=self.rows {
            for j in 1..=self.cols {
                out.push(format!("{}_{}_{}", self.name, i, j));
            }
        }
        out
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.column_names())?;
        for row in self.values.chunks(self.width().max(1)) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn read_csv(name: &str, rows: usize, cols: usize, path: &Path) -> Result<Self> {
        let mut block = Self::new(name, rows, cols);
        let mut r = csv::Reader::from_path(path)?;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != block.width() {
                return Err(Error::Data(format!("{}: row {} has {} fields, expected {}", path.display(), i + 1, rec.len(), block.width())));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: format!("{}#{}", name, c + 1),
                    msg: format!("not a number: {field:?}"),
                })?;
                block.values.push(v);
            }
        }
        Ok(block)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub p: usize,
    pub q: usize,
    pub retained: usize,
    pub blocks: Vec<BlockMeta>,
}

/// Retained post-burn-in draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub p: usize,
    pub q: usize,
    pub blocks: Vec<DrawBlock>,
}

impl ChainOutput {
    /// Number of draws kept by a run of `iterations` with the given burn-in and thinning.
    pub fn expected_retained(iterations: usize, burn_in: usize, thin: usize) -> usize {
        iterations.saturating_sub(burn_in).div_ceil(thin.max(1))
    }

    pub fn retained(&self) -> usize {
        self.blocks.first().map_or(0, DrawBlock::draws)
    }

    pub fn block(&self, name: &str) -> Option<&DrawBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut DrawBlock> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    pub fn coefficients(&self) -> Option<&DrawBlock> {
        self.block(BLOCK_B)
    }

    pub fn meta(&self) -> ChainMeta {
        ChainMeta {
            method: self.method.clone(),
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            p: self.p,
            q: self.q,
            retained: self.retained(),
            blocks: self.blocks.iter().map(|b| BlockMeta { name: b.name.clone(), rows: b.rows, cols: b.cols }).collect(),
        }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for b in &self.blocks {
            b.write_csv(&dir.join(format!("{}.csv", b.name)))?;
        }
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta: ChainMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let blocks = meta
            .blocks
            .iter()
            .map(|b| DrawBlock::read_csv(&b.name, b.rows, b.cols, &dir.join(format!("{}.csv", b.name))))
            .collect::<Result<Vec<_>>>()?;
        let out = Self {
            method: meta.method,
            seed: meta.seed,
            iterations: meta.iterations,
            burn_in: meta.burn_in,
            thin: meta.thin,
            p: meta.p,
            q: meta.q,
            blocks,
        };
        if out.retained() != meta.retained {
            return Err(Error::Data(format!("meta.json records {} draws but the CSV holds {}", meta.retained, out.retained())));
        }
        Ok(out)
    }
}
