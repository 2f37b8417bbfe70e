use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::batch::Batch;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Exec};
use crate::specmat::{rank_with_tolerance, singular_values, split_seed, RealMatrix, RngHandle, RANK_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAudit {
    pub dataset: String,
    pub n: usize,
    pub trial: usize,
    /// Numerical rank of the sampled `features x n` matrix, equal to the rank
    /// of its Gram matrix.
    pub rank: usize,
    pub mean_cosine: f64,
}

impl RankAudit {
    pub const CSV_HEADER: &'static str = "dataset,n,trial,rank,mean_cosine";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{:.6}", self.dataset, self.n, self.trial, self.rank, self.mean_cosine)
    }
}

/// Mean cosine similarity over all pairs of distinct columns. Pairs with a
/// zero column count as 0; fewer than two columns give 0.
pub fn mean_pairwise_cosine(x: &RealMatrix) -> f64 {
    let n = x.cols();
    if n < 2 {
        return 0.0;
    }
    let g = x.t_matmul(x);
    let norms: Vec<f64> = (0..n).map(|j| g[(j, j)].sqrt()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if norms[i] > 0.0 && norms[j] > 0.0 {
                total += g[(i, j)] / (norms[i] * norms[j]);
            }
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Draws `trials` batches of `n` distinct samples and measures the rank and
/// mean cosine similarity of each. Trial `t` uses the stream
/// `split_seed(seed, t)`.
pub fn rank_audit(batch: &Batch, trials: usize, n: usize, seed: u64, exec: Exec) -> Result<Vec<RankAudit>> {
    rank_audit_with_tolerance(batch, trials, n, seed, RANK_TOL, exec)
}

/// [`rank_audit`] counting singular values at or above `rel_tol * sigma_max`.
pub fn rank_audit_with_tolerance(
    batch: &Batch,
    trials: usize,
    n: usize,
    seed: u64,
    rel_tol: f64,
    exec: Exec,
) -> Result<Vec<RankAudit>> {
    if n > batch.len() {
        return Err(Error::InvalidArgument(format!("batch size {n} exceeds the {} available samples", batch.len())));
    }
    let tag = batch.tag();
    Ok(map_indexed(exec, trials, |trial| {
        let mut rng = RngHandle::new(split_seed(seed, trial as u64));
        let idx = rng.sample_without_replacement(batch.len(), n);
        let x = batch.data.select_columns(&idx);
        let rank = rank_with_tolerance(&singular_values(&x), rel_tol);
        RankAudit { dataset: tag.clone(), n, trial, rank, mean_cosine: mean_pairwise_cosine(&x) }
    }))
}

pub fn audits_to_csv(audits: &[RankAudit]) -> String {
    let mut s = format!("{}\n", RankAudit::CSV_HEADER);
    for a in audits {
        let _ = writeln!(s, "{}", a.csv_row());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::databatch::BatchSource;

    #[test]
    fn identical_columns() {
        let data = RealMatrix::from_fn(5, 6, |i, _| (i + 1) as f64);
        let b = Batch::new(data, vec![0; 6], BatchSource::Synthetic { kind: "same".into(), seed: 0 }).unwrap();
        let audits = rank_audit(&b, 3, 4, 1, Exec::Sequential).unwrap();
        for a in &audits {
            assert_eq!(a.rank, 1);
            assert!((a.mean_cosine - 1.0).abs() < 1e-12);
        }
        assert!(rank_audit(&b, 1, 7, 1, Exec::Sequential).is_err());
        assert_eq!(audits_to_csv(&audits).lines().count(), 4);
    }

    #[test]
    fn zero_columns_count_as_orthogonal() {
        let x = RealMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert!((mean_pairwise_cosine(&x) - 1.0 / 3.0).abs() < 1e-15);
    }
}
