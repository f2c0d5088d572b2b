use serde::{Deserialize, Serialize};

use crate::chain::{ChainOutput, DrawBlock, BLOCK_B, BLOCK_SIGMA};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            other => Err(Error::InvalidParameter(format!("unknown summary statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub coefficients: DenseMatrix,
    pub covariance: Option<DenseMatrix>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn summarize_block(block: &DrawBlock, statistic: Statistic) -> Result<DenseMatrix> {
    let t = block.draws();
    if t == 0 {
        return Err(Error::EmptyChain);
    }
    Ok(DenseMatrix::from_fn(block.rows, block.cols, |i, j| {
        let mut s = block.series(i, j);
        match statistic {
            Statistic::Mean => s.iter().sum::<f64>() / t as f64,
            Statistic::Median => median(&mut s),
        }
    }))
}

/// Elementwise posterior mean or median of `B` (and `Sigma` when stored).
pub fn posterior_summary(chain: &ChainOutput, statistic: Statistic) -> Result<PosteriorSummary> {
    let b = chain.block(BLOCK_B).ok_or(Error::EmptyChain)?;
    let coefficients = summarize_block(b, statistic)?;
    let covariance = chain.block(BLOCK_SIGMA).map(|s| summarize_block(s, statistic)).transpose()?;
    Ok(PosteriorSummary { coefficients, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::standard_normal;
    use crate::rng::RngStream;

    fn chain_of(values: &[f64]) -> ChainOutput {
        let mut b = DrawBlock::new(BLOCK_B, 1, 1);
        for v in values {
            b.push_slice(&[*v]);
        }
        ChainOutput { method: "dss".into(), seed: 0, iterations: values.len(), burn_in: 0, thin: 1, p: 1, q: 1, blocks: vec![b] }
    }

    #[test]
    fn constant_chain() {
        let mut b = DrawBlock::new(BLOCK_B, 2, 2);
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.0]);
        for _ in 0..5 {
            b.push(&m);
        }
        let chain = ChainOutput { method: "dss".into(), seed: 0, iterations: 5, burn_in: 0, thin: 1, p: 2, q: 2, blocks: vec![b] };
        assert_eq!(posterior_summary(&chain, Statistic::Mean).unwrap().coefficients, m);
        assert_eq!(posterior_summary(&chain, Statistic::Median).unwrap().coefficients, m);
    }

    #[test]
    fn mean_and_median() {
        let chain = chain_of(&[0.0, 1.0, 5.0]);
        assert_eq!(posterior_summary(&chain, Statistic::Mean).unwrap().coefficients[(0, 0)], 2.0);
        assert_eq!(posterior_summary(&chain, Statistic::Median).unwrap().coefficients[(0, 0)], 1.0);
        assert!(posterior_summary(&chain, Statistic::Mean).unwrap().covariance.is_none());
    }

    #[test]
    fn empty_chain_errors() {
        assert!(matches!(posterior_summary(&chain_of(&[]), Statistic::Mean), Err(Error::EmptyChain)));
    }

    #[test]
    fn normal_draws_mean() {
        let mut rng = RngStream::new(3);
        let xs: Vec<f64> = (0..10_000).map(|_| standard_normal(&mut rng)).collect();
        let m = posterior_summary(&chain_of(&xs), Statistic::Mean).unwrap().coefficients[(0, 0)];
        assert!(m.abs() < 0.05);
    }
}
