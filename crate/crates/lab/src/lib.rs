//! Experiment orchestration on top of `bnlab-core`: sweeps, reports and
//! plot-ready outputs, one runner per CLI subcommand.

pub mod audit;
pub mod calibration;
pub mod data;
pub mod gradients;
pub mod isometry;
pub mod moments;
pub mod output;
pub mod series;
pub mod shaping_suite;
pub mod spec;
pub mod training;

use anyhow::Result;

use bnlab_core::netgrad::LossKind;
use bnlab_core::par::Exec;

use output::{write_sidecar, Check};
use spec::{ExperimentKind, ExperimentSpec};

/// Validates the spec, runs the experiment, writes its outputs and sidecar
/// into `spec.out_dir` and returns the experiment's checks.
pub fn run_experiment(spec: &ExperimentSpec, exec: Exec) -> Result<Vec<Check>> {
    spec.validate()?;
    spec.prepare_out_dir()?;
    let checks = match spec.kind {
        ExperimentKind::Isometry => {
            let r = isometry::run_isometry_decay(spec, exec)?;
            isometry::write_isometry_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::Gradients => {
            let r = gradients::run_gradient_sweep(spec, exec)?;
            gradients::write_gradient_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::Degenerate => {
            let r = gradients::run_degenerate(spec, exec)?;
            gradients::write_gradient_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::Weingarten => {
            let r = moments::run_weingarten(spec, exec)?;
            moments::write_weingarten_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::Shaping => {
            let r = shaping_suite::run_shaping_suite(spec, exec)?;
            shaping_suite::write_shaping_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::RankAudit => {
            let data = data::resolve_dataset(spec.dataset.as_deref())?;
            let r = audit::run_rank_audit(spec, &data, exec)?;
            audit::write_audit_outputs(spec, &r)?;
            r.checks
        }
        ExperimentKind::Train => {
            let data = data::resolve_dataset(spec.dataset.as_deref())?;
            let runs = training::run_training(spec, &data, LossKind::CrossEntropySoftmax, exec)?;
            training::write_training_outputs(spec, &runs)?;
            training::training_checks(&runs)
        }
    };
    write_sidecar(spec)?;
    output::write_json(&spec.out_dir, "checks.json", &checks)?;
    Ok(checks)
}
