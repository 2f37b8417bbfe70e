//! Rank and similarity of random minibatches of a dataset.

use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use bnlab_core::databatch::{audits_to_csv, rank_audit_with_tolerance, Batch, RankAudit};
use bnlab_core::par::Exec;
use bnlab_core::specmat::split_seed;
use bnlab_core::stats::Moments;

use crate::output::{write_file, Check};
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub n: usize,
    pub trials: usize,
    pub mean_rank: f64,
    pub rank_std: f64,
    pub min_rank: usize,
    pub mean_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: String,
    pub audits: Vec<RankAudit>,
    pub summaries: Vec<RankSummary>,
    pub checks: Vec<Check>,
}

impl AuditReport {
    pub fn summary(&self, n: usize) -> Option<&RankSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }
}

/// Audits `spec.trials` batches at every size in `spec.batch_sizes`.
pub fn run_rank_audit(spec: &ExperimentSpec, data: &Batch, exec: Exec) -> Result<AuditReport> {
    let mut audits = Vec::new();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();
    for (i, &n) in spec.batch_sizes.iter().enumerate() {
        let seed = split_seed(spec.network.seed, i as u64);
        let rows = rank_audit_with_tolerance(data, spec.trials, n, seed, spec.rank_tol.relative(n), exec)?;
        let ranks: Moments = rows.iter().map(|a| a.rank as f64).collect();
        let cos: Moments = rows.iter().map(|a| a.mean_cosine).collect();
        let s = RankSummary {
            n,
            trials: rows.len(),
            mean_rank: ranks.mean,
            rank_std: ranks.std_dev(),
            min_rank: rows.iter().map(|a| a.rank).min().unwrap_or(0),
            mean_cosine: cos.mean,
        };
        let bound = n.min(data.features());
        checks.push(Check::new(
            format!("rank n={n} within bound"),
            rows.iter().all(|a| a.rank <= bound),
            format!("mean rank {:.2} +- {:.2}, at most {bound}", s.mean_rank, s.rank_std),
        ));
        summaries.push(s);
        audits.extend(rows);
    }
    Ok(AuditReport { dataset: data.tag(), audits, summaries, checks })
}

pub fn write_audit_outputs(spec: &ExperimentSpec, report: &AuditReport) -> Result<()> {
    write_file(&spec.out_dir, "rank_audit.csv", &audits_to_csv(&report.audits))?;
    let mut s = String::from("dataset,n,trials,mean_rank,rank_std,min_rank,mean_cosine\n");
    for r in &report.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{:.4},{},{:.6}",
            report.dataset, r.n, r.trials, r.mean_rank, r.rank_std, r.min_rank, r.mean_cosine
        );
    }
    write_file(&spec.out_dir, "rank_summary.csv", &s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentKind;
    use bnlab_core::databatch::{synth_batch, SynthKind};
    use bnlab_core::specmat::RngHandle;

    #[test]
    fn gaussian_batches_have_full_rank() {
        let data = synth_batch(SynthKind::Gaussian, 12, 40, 3, &mut RngHandle::new(4)).unwrap();
        let mut spec = ExperimentSpec::defaults(ExperimentKind::RankAudit);
        spec.apply_kv("batch_sizes = 8, 20\ntrials = 5").unwrap();
        let r = run_rank_audit(&spec, &data, Exec::Sequential).unwrap();
        assert_eq!(r.audits.len(), 10);
        assert_eq!(r.summary(8).unwrap().mean_rank, 8.0);
        assert_eq!(r.summary(20).unwrap().mean_rank, 12.0);
        assert!(r.checks.iter().all(|c| c.passed));
    }
}
