//! Loading, cleaning, standardizing and splitting tabular data such as NIR
//! spectra with composition responses.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dist::standard_normal;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{self, ColumnStats, CoefficientMatrix, Dataset};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub values: DenseMatrix,
    pub path: Option<PathBuf>,
}

impl RawTable {
    pub fn new(names: Vec<String>, values: DenseMatrix) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!("{} names for {} columns", names.len(), values.ncols())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("table entry".into()));
        }
        Ok(Self { names, values, path: None })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::Data(format!("no column named `{name}`")))
    }

    fn select(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])])
    }

    /// Rows of `self` followed by rows of `other`; column names must agree.
    pub fn vstack(&self, other: &RawTable) -> Result<RawTable> {
        if self.names != other.names {
            return Err(Error::Data("tables have different columns".into()));
        }
        let (a, b) = (self.n_rows(), other.n_rows());
        let values = DenseMatrix::from_fn(a + b, self.names.len(), |i, j| {
            if i < a {
                self.values[(i, j)]
            } else {
                other.values[(i - a, j)]
            }
        });
        Ok(RawTable { names: self.names.clone(), values, path: self.path.clone() })
    }
}

/// Reads a comma-separated numeric table with a header row.
pub fn load_csv(path: &Path) -> Result<RawTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: names[j].clone(),
                msg: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: i + 1, column: names[j].clone(), msg: format!("`{cell}` is not finite") });
            }
            data.push(v);
        }
        rows += 1;
    }
    let mut table = RawTable::new(names.clone(), DenseMatrix::from_row_slice(rows, names.len(), &data))?;
    table.path = Some(path.to_path_buf());
    Ok(table)
}

pub fn write_csv(table: &RawTable, path: &Path) -> Result<()> {
    crate::simgen::write_matrix_csv(path, &table.values, &table.names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorSelection {
    Explicit { columns: Vec<String> },
    /// Every candidate column from `first` to `last` inclusive.
    Range { first: String, last: String },
    /// `count` columns evenly spaced over the candidates between `first` and
    /// `last` (default: all non-response columns).
    Stride {
        #[serde(default)]
        first: Option<String>,
        #[serde(default)]
        last: Option<String>,
        count: usize,
    },
}

impl Default for PredictorSelection {
    fn default() -> Self {
        PredictorSelection::Stride { first: None, last: None, count: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Split {
    /// Everything is training data.
    #[default]
    None,
    /// 0-based row indices (before dropping) held out for testing.
    TestRows { rows: Vec<usize> },
    /// The last `count` rows are the test set.
    Trailing { count: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSpec {
    pub responses: Vec<String>,
    pub predictors: PredictorSelection,
    /// 0-based row indices removed before anything else.
    pub drop_rows: Vec<usize>,
    pub split: Split,
}

pub fn evenly_spaced(len: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 || count > len {
        return Err(Error::InvalidParameter(format!("cannot pick {count} of {len} columns")));
    }
    if count == 1 {
        return Ok(vec![0]);
    }
    Ok((0..count).map(|i| ((i * (len - 1)) as f64 / (count - 1) as f64).round() as usize).collect())
}

impl IngestSpec {
    pub fn response_indices(&self, table: &RawTable) -> Result<Vec<usize>> {
        if self.responses.is_empty() {
            return Err(Error::InvalidParameter("at least one response column is required".into()));
        }
        self.responses.iter().map(|r| table.column_index(r)).collect()
    }

    pub fn predictor_indices(&self, table: &RawTable) -> Result<Vec<usize>> {
        let resp = self.response_indices(table)?;
        let candidates: Vec<usize> = (0..table.names.len()).filter(|c| !resp.contains(c)).collect();
        let pos = |name: &str| -> Result<usize> {
            let c = table.column_index(name)?;
            candidates.iter().position(|&x| x == c).ok_or_else(|| Error::Data(format!("`{name}` is a response column")))
        };
        let span = |first: Option<&str>, last: Option<&str>| -> Result<&[usize]> {
            let a = first.map(pos).transpose()?.unwrap_or(0);
            let b = last.map(pos).transpose()?.unwrap_or(candidates.len().saturating_sub(1));
            if candidates.is_empty() || a > b {
                return Err(Error::InvalidParameter("empty predictor range".into()));
            }
            Ok(&candidates[a..=b])
        };
        let picked: Vec<usize> = match &self.predictors {
            PredictorSelection::Explicit { columns } => columns.iter().map(|c| pos(c).map(|i| candidates[i])).collect::<Result<_>>()?,
            PredictorSelection::Range { first, last } => span(Some(first), Some(last))?.to_vec(),
            PredictorSelection::Stride { first, last, count } => {
                let s = span(first.as_deref(), last.as_deref())?;
                evenly_spaced(s.len(), *count)?.into_iter().map(|i| s[i]).collect()
            }
        };
        if picked.is_empty() {
            return Err(Error::InvalidParameter("no predictors selected".into()));
        }
        Ok(picked)
    }

    pub fn validate(&self, table: &RawTable) -> Result<()> {
        self.predictor_indices(table)?;
        let n = table.n_rows();
        let bad = |r: &usize| *r >= n;
        if let Some(r) = self.drop_rows.iter().find(|r| bad(r)) {
            return Err(Error::InvalidParameter(format!("drop row {r} out of range for {n} rows")));
        }
        match &self.split {
            Split::TestRows { rows } if rows.iter().any(bad) => Err(Error::InvalidParameter("test row out of range".into())),
            Split::Trailing { count } if *count >= n => Err(Error::InvalidParameter("trailing test block leaves no training rows".into())),
            _ => Ok(()),
        }
    }
}

/// Drops rows, splits, and standardizes both parts by the training statistics.
pub fn standardize(table: &RawTable, spec: &IngestSpec) -> Result<(Dataset, Dataset)> {
    spec.validate(table)?;
    let resp = spec.response_indices(table)?;
    let pred = spec.predictor_indices(table)?;
    let n = table.n_rows();
    let is_test = |i: usize| match &spec.split {
        Split::None => false,
        Split::TestRows { rows } => rows.contains(&i),
        Split::Trailing { count } => i >= n - count,
    };
    let kept: Vec<usize> = (0..n).filter(|i| !spec.drop_rows.contains(i)).collect();
    let train_rows: Vec<usize> = kept.iter().copied().filter(|&i| !is_test(i)).collect();
    let test_rows: Vec<usize> = kept.iter().copied().filter(|&i| is_test(i)).collect();
    if train_rows.len() < 2 {
        return Err(Error::Data(format!("only {} training rows after dropping", train_rows.len())));
    }
    let pnames: Vec<String> = pred.iter().map(|&c| table.names[c].clone()).collect();
    let rnames: Vec<String> = resp.iter().map(|&c| table.names[c].clone()).collect();
    let x = table.select(&train_rows, &pred);
    let y = table.select(&train_rows, &resp);
    let xs = ColumnStats::fit(&x, &pnames)?;
    let ys = ColumnStats::fit(&y, &rnames)?;
    let train = Dataset::with_stats(x, y, xs.clone(), ys.clone(), pnames.clone(), rnames.clone())?;
    let test = Dataset::with_stats(table.select(&test_rows, &pred), table.select(&test_rows, &resp), xs, ys, pnames, rnames)?;
    Ok((train, test))
}

/// Separate train and test files: drops apply to training rows only.
pub fn standardize_tables(train: &RawTable, test: Option<&RawTable>, spec: &IngestSpec) -> Result<(Dataset, Dataset)> {
    match test {
        None => standardize(train, spec),
        Some(t) => {
            let spec = IngestSpec { split: Split::Trailing { count: t.n_rows() }, ..spec.clone() };
            standardize(&train.vstack(t)?, &spec)
        }
    }
}

pub fn unstandardize_coefficients(b_std: &CoefficientMatrix, data: &Dataset) -> Result<CoefficientMatrix> {
    model::unstandardize_coefficients(b_std, &data.x_stats, &data.y_stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub columns: usize,
    pub pairs: usize,
    pub max_abs: f64,
    pub min_abs: f64,
    pub threshold: f64,
    pub fraction_above: f64,
}

pub fn correlation_matrix(x: &DenseMatrix, names: &[String]) -> Result<DenseMatrix> {
    let stats = ColumnStats::fit(x, names)?;
    let z = stats.apply(x)?;
    Ok(z.transpose() * &z / (x.nrows() - 1) as f64)
}

/// Summary of pairwise Pearson correlations between columns.
pub fn correlation_report(x: &DenseMatrix, threshold: f64) -> Result<CorrelationReport> {
    let p = x.ncols();
    if p < 2 {
        return Err(Error::InvalidParameter("correlation report needs at least two columns".into()));
    }
    let r = correlation_matrix(x, &model::default_names("column ", p))?;
    let mut max_abs = 0.0f64;
    let mut min_abs = f64::INFINITY;
    let mut above = 0usize;
    for i in 0..p {
        for j in 0..i {
            let a = r[(i, j)].abs().min(1.0);
            max_abs = max_abs.max(a);
            min_abs = min_abs.min(a);
            if a >= threshold {
                above += 1;
            }
        }
    }
    let pairs = p * (p - 1) / 2;
    Ok(CorrelationReport { columns: p, pairs, max_abs, min_abs, threshold, fraction_above: above as f64 / pairs as f64 })
}

/// Names of the composition columns in [`synthetic_nir_table`].
pub const NIR_RESPONSES: [&str; 4] = ["fat", "sucrose", "flour", "water"];

/// NIR-like table: `wavelengths` smooth, strongly collinear absorbance
/// columns driven by a per-sample scatter factor and four composition
/// variables, followed by the composition columns themselves.
pub fn synthetic_nir_table(rows: usize, wavelengths: usize, seed: u64) -> Result<RawTable> {
    if wavelengths < 2 {
        return Err(Error::InvalidParameter("need at least two wavelengths".into()));
    }
    let mut rng = RngStream::new(seed);
    let centers = [0.2, 0.45, 0.6, 0.85];
    let widths = [0.08, 0.12, 0.2, 0.05];
    let comp_mean = [18.0, 17.0, 47.0, 3.0];
    let comp_sd = [3.0, 4.0, 3.0, 0.6];
    let mut names: Vec<String> = (0..wavelengths).map(|w| format!("w{}", 1100 + 2 * w)).collect();
    names.extend(NIR_RESPONSES.iter().map(|s| s.to_string()));
    let mut m = DenseMatrix::zeros(rows, wavelengths + 4);
    for i in 0..rows {
        let comp: Vec<f64> = (0..4).map(|k| comp_mean[k] + comp_sd[k] * standard_normal(&mut rng)).collect();
        let scatter = 1.0 + 0.15 * standard_normal(&mut rng);
        let offset = 0.05 * standard_normal(&mut rng);
        for w in 0..wavelengths {
            let l = w as f64 / (wavelengths - 1) as f64;
            let base = 0.4 + 0.8 * l;
            let bands: f64 = (0..4).map(|k| comp[k] / 100.0 * (-0.5 * ((l - centers[k]) / widths[k]).powi(2)).exp()).sum();
            m[(i, w)] = scatter * (base + bands) + offset + 1e-4 * standard_normal(&mut rng);
        }
        for k in 0..4 {
            m[(i, wavelengths + k)] = comp[k];
        }
    }
    RawTable::new(names, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::standard_normal_matrix;
    use crate::linalg::ar1_covariance;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn load_small_file() {
        let d = tempfile::tempdir().unwrap();
        let t = load_csv(&write(d.path(), "a.csv", "a,b\n1,2\n3,4\n5,6\n")).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.values[(2, 1)], 6.0);
    }

    #[test]
    fn na_cell_names_row_and_column() {
        let d = tempfile::tempdir().unwrap();
        let err = load_csv(&write(d.path(), "a.csv", "a,b\n1,2\n3,NA\n")).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (2, "b")),
            other => panic!("{other}"),
        }
        assert!(load_csv(&d.path().join("missing.csv")).is_err());
        assert!(load_csv(&write(d.path(), "r.csv", "a,b\n1,2\n3\n")).is_err());
    }

    #[test]
    fn round_trip() {
        let d = tempfile::tempdir().unwrap();
        let mut rng = RngStream::new(4);
        let t = RawTable::new(vec!["u".into(), "v".into()], standard_normal_matrix(6, 2, &mut rng) * 1e3).unwrap();
        let p = d.path().join("t.csv");
        write_csv(&t, &p).unwrap();
        let back = load_csv(&p).unwrap();
        assert!((back.values - t.values).abs().max() < 1e-12);
    }

    fn small_table() -> RawTable {
        let m = DenseMatrix::from_row_slice(4, 3, &[1.0, 5.0, 10.0, 2.0, 5.5, 20.0, 3.0, 7.0, 30.0, 100.0, 0.0, 40.0]);
        RawTable::new(vec!["x1".into(), "x2".into(), "y".into()], m).unwrap()
    }

    #[test]
    fn standardize_simple_column() {
        let spec = IngestSpec {
            responses: vec!["y".into()],
            predictors: PredictorSelection::Explicit { columns: vec!["x1".into()] },
            drop_rows: vec![3],
            split: Split::None,
        };
        let (train, test) = standardize(&small_table(), &spec).unwrap();
        assert_eq!(train.x.column(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(test.n(), 0);
    }

    #[test]
    fn constant_column_is_reported() {
        let m = DenseMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let t = RawTable::new(vec!["flat".into(), "y".into()], m).unwrap();
        let spec = IngestSpec { responses: vec!["y".into()], predictors: PredictorSelection::Range { first: "flat".into(), last: "flat".into() }, ..Default::default() };
        assert!(matches!(standardize(&t, &spec), Err(Error::ZeroVariance(name)) if name == "flat"));
    }

    #[test]
    fn test_rows_use_train_statistics() {
        let spec = IngestSpec {
            responses: vec!["y".into()],
            predictors: PredictorSelection::Range { first: "x1".into(), last: "x2".into() },
            drop_rows: vec![],
            split: Split::Trailing { count: 1 },
        };
        let (train, test) = standardize(&small_table(), &spec).unwrap();
        for c in 0..2 {
            let col: Vec<f64> = train.x.column(c).iter().copied().collect();
            let mean = col.iter().sum::<f64>() / 3.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0;
            assert!(mean.abs() < 1e-8 && (var - 1.0).abs() < 1e-8);
        }
        // the held-out row sits far from the training mean
        assert!(test.x[(0, 0)] > 10.0);
    }

    #[test]
    fn cookies_shaped_drop_to_39() {
        let train = synthetic_nir_table(41, 700, 1).unwrap();
        let test = synthetic_nir_table(31, 700, 2).unwrap();
        let spec = IngestSpec {
            responses: NIR_RESPONSES.iter().map(|s| s.to_string()).collect(),
            drop_rows: vec![22, 39],
            ..Default::default()
        };
        let (tr, te) = standardize_tables(&train, Some(&test), &spec).unwrap();
        assert_eq!((tr.n(), tr.p(), tr.q()), (39, 50, 4));
        assert_eq!(te.n(), 31);
        let rep = correlation_report(&tr.x_raw, 0.99).unwrap();
        assert!(rep.max_abs >= 0.99, "{rep:?}");
    }

    #[test]
    fn stride_selection() {
        assert_eq!(evenly_spaced(700, 50).unwrap().len(), 50);
        assert_eq!(evenly_spaced(5, 3).unwrap(), vec![0, 2, 4]);
        let mut e = evenly_spaced(700, 50).unwrap();
        e.dedup();
        assert_eq!(e.len(), 50);
        assert!(evenly_spaced(3, 4).is_err());
    }

    #[test]
    fn unstandardize_scales() {
        let ds = Dataset::unstandardized(DenseMatrix::zeros(2, 1), DenseMatrix::zeros(2, 1)).unwrap();
        let b = DenseMatrix::from_element(1, 1, 0.7);
        assert_eq!(unstandardize_coefficients(&b, &ds).unwrap(), b);
        let mut ds2 = ds.clone();
        ds2.x_stats.sds = vec![4.0];
        ds2.y_stats.sds = vec![2.0];
        assert_eq!(unstandardize_coefficients(&DenseMatrix::from_element(1, 1, 1.0), &ds2).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn two_path_prediction() {
        let mut rng = RngStream::new(12);
        let x_raw = standard_normal_matrix(30, 3, &mut rng) * 3.0 + DenseMatrix::from_element(30, 3, 5.0);
        let y_raw = standard_normal_matrix(30, 2, &mut rng) * 2.0 + DenseMatrix::from_element(30, 2, -1.0);
        let ds = Dataset::standardized(x_raw.clone(), y_raw, model::default_names("x", 3), model::default_names("y", 2)).unwrap();
        let b_std = standard_normal_matrix(3, 2, &mut rng);
        let a = model::predict_original_scale(&b_std, &ds.x, &ds.y_stats).unwrap();
        let b_orig = unstandardize_coefficients(&b_std, &ds).unwrap();
        let icpt = model::implied_intercept(&b_orig, &ds.x_stats, &ds.y_stats);
        let mut b = &x_raw * &b_orig;
        for k in 0..2 {
            b.column_mut(k).add_scalar_mut(icpt[k]);
        }
        assert!((a - b).abs().max() < 1e-10);
    }

    #[test]
    fn correlation_examples() {
        let mut rng = RngStream::new(2);
        let c = standard_normal_matrix(50, 1, &mut rng);
        let dup = DenseMatrix::from_fn(50, 2, |i, _| c[(i, 0)]);
        assert!((correlation_report(&dup, 0.99).unwrap().max_abs - 1.0).abs() < 1e-12);
        let ind = standard_normal_matrix(10_000, 4, &mut rng);
        assert!(correlation_report(&ind, 0.99).unwrap().max_abs < 0.05);
        let l = ar1_covariance(5, 0.7).unwrap();
        let x = standard_normal_matrix(20_000, 5, &mut rng) * l.cholesky().transpose();
        let r = correlation_matrix(&x, &model::default_names("x", 5)).unwrap();
        for j in 0..4 {
            assert!((r[(j, j + 1)] - 0.7).abs() < 0.02);
        }
        assert!(correlation_report(&c, 0.5).is_err());
    }
}
