//! Monte Carlo checks of Haar moments and of the one-layer isometry lift.

use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use bnlab_core::netfwd::bn_simplified;
use bnlab_core::par::Exec;
use bnlab_core::specmat::{sample_gaussian, sample_haar_orthogonal, split_seed, RngHandle};
use bnlab_core::weingarten::{
    verify_isometry_lift, verify_moment_mc, IsometryLiftReport, MomentEstimate, MomentPattern, MomentSpec,
};

use crate::output::{write_file, write_json, Check};
use crate::spec::ExperimentSpec;

/// Standard errors allowed between an estimate and its target.
pub const N_STDERR: f64 = 3.0;

/// Tolerance of the exact lift on orthogonal inputs.
pub const ORTHOGONAL_TOL: f64 = 1e-9;

pub const PATTERNS: [MomentPattern; 3] = [MomentPattern::E1, MomentPattern::E2, MomentPattern::Deg2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftCase {
    /// `gaussian` for `BN(G)` inputs, `orthogonal` for Haar inputs.
    pub input: String,
    pub trial: usize,
    pub report: IsometryLiftReport,
}

impl LiftCase {
    pub fn holds(&self) -> bool {
        if self.input == "orthogonal" {
            (self.report.mean_isometry_out - 1.0).abs() <= ORTHOGONAL_TOL
                && (self.report.isometry_lower_bound - 1.0).abs() <= ORTHOGONAL_TOL
                && self.report.mean_gap_out.abs() <= ORTHOGONAL_TOL
        } else {
            self.report.isometry_bound_holds(N_STDERR) && self.report.gap_bound_holds(N_STDERR)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeingartenReport {
    pub moments: Vec<MomentEstimate>,
    pub lifts: Vec<LiftCase>,
    pub checks: Vec<Check>,
}

/// Moment estimates of every pattern at every width in `spec.widths`
/// (`d >= 3`), and the lift on `spec.trials` inputs `BN(G)` plus one Haar
/// input per width.
pub fn run_weingarten(spec: &ExperimentSpec, exec: Exec) -> Result<WeingartenReport> {
    let base = spec.network.seed;
    let mut moments = Vec::new();
    let mut lifts = Vec::new();
    let mut checks = Vec::new();
    for (wi, &d) in spec.widths.iter().enumerate() {
        for (pi, &pattern) in PATTERNS.iter().enumerate() {
            let seed = split_seed(base, (wi * PATTERNS.len() + pi) as u64);
            let est = verify_moment_mc(MomentSpec { d, pattern }, spec.mc_samples, seed, exec)?;
            checks.push(Check::new(
                format!("{} d={d}", pattern.name()),
                est.within(N_STDERR),
                format!("mc {:.6e} vs {:.6e}, z = {:.2}", est.mc_mean, est.closed_form, est.z_score),
            ));
            moments.push(est);
        }

        let lift_root = RngHandle::new(split_seed(base, 1 << 20)).child(d as u64);
        let mut failures = 0;
        for t in 0..spec.trials {
            let mut rng = lift_root.child(2 * t as u64);
            let x = bn_simplified(&sample_gaussian(d, 1.0, &mut rng)?)?;
            let report = verify_isometry_lift(&x, spec.lift_samples, lift_root.child(2 * t as u64 + 1).seed(), exec)?;
            let case = LiftCase { input: "gaussian".into(), trial: t, report };
            failures += usize::from(!case.holds());
            lifts.push(case);
        }
        checks.push(Check::new(
            format!("lift bound d={d}"),
            failures == 0,
            format!("{failures} of {} inputs violate the bound by more than {N_STDERR} stderr", spec.trials),
        ));

        let mut rng = lift_root.child(u64::MAX);
        let q = sample_haar_orthogonal(d, &mut rng)?;
        let report = verify_isometry_lift(&q, spec.lift_samples, rng.child(0).seed(), exec)?;
        let case = LiftCase { input: "orthogonal".into(), trial: 0, report };
        checks.push(Check::new(
            format!("lift equality d={d}"),
            case.holds(),
            format!("E[I] = {:.12}, bound {:.12}", case.report.mean_isometry_out, case.report.isometry_lower_bound),
        ));
        lifts.push(case);
    }
    Ok(WeingartenReport { moments, lifts, checks })
}

pub fn lift_csv(lifts: &[LiftCase]) -> String {
    let mut s = String::from(
        "input,trial,d,samples,seed,isometry_in,gap_in,factor,mean_isometry_out,isometry_stderr,\
         isometry_lower_bound,mean_gap_out,gap_stderr,gap_upper_bound\n",
    );
    for c in lifts {
        let r = &c.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            c.input,
            c.trial,
            r.d,
            r.samples,
            r.seed,
            r.isometry_in,
            r.gap_in,
            r.factor,
            r.mean_isometry_out,
            r.isometry_stderr,
            r.isometry_lower_bound,
            r.mean_gap_out,
            r.gap_stderr,
            r.gap_upper_bound
        );
    }
    s
}

pub fn write_weingarten_outputs(spec: &ExperimentSpec, report: &WeingartenReport) -> Result<()> {
    write_json(&spec.out_dir, "moments.json", &report.moments)?;
    write_file(&spec.out_dir, "lift.csv", &lift_csv(&report.lifts))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentKind;

    #[test]
    fn small_run_passes() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Weingarten);
        spec.apply_kv("widths = 3\nmc_samples = 4000\nlift_samples = 1000\ntrials = 3").unwrap();
        let r = run_weingarten(&spec, Exec::Parallel).unwrap();
        assert_eq!(r.moments.len(), 3);
        assert_eq!(r.lifts.len(), 4);
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
        assert_eq!(lift_csv(&r.lifts).lines().count(), 5);
    }
}
