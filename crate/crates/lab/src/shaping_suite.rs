//! Explosion-rate sweep, power-law fit, gain schedule and the shaped
//! against unshaped gradient sweep.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bnlab_core::netfwd::{Activation, GainSchedule, NetworkConfig};
use bnlab_core::par::{try_map_indexed, Exec};
use bnlab_core::shaping::{
    cumulative_rate_bound, fit_power_law, gain_schedule_from_fit, gaussian_probe, gradient_norms_at_init, measure_rate,
    repetition_seeds, RateFit, RateMeasurement,
};

use crate::output::{write_file, write_json, Check};
use crate::series::{emit_plot_data, Series};
use crate::spec::ExperimentSpec;

/// Measured rates below this count as no explosion; the same band as
/// bounded gradient slopes.
pub const NEGLIGIBLE_RATE: f64 = crate::gradients::BOUNDED_SLOPE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingReport {
    pub activation: Activation,
    pub width: usize,
    pub measurements: Vec<RateMeasurement>,
    /// `None` for the identity control.
    pub fit: Option<RateFit>,
    pub schedule: GainSchedule,
    /// Mean first-layer log gradient norm against depth.
    pub unshaped: Series,
    pub shaped: Series,
    pub checks: Vec<Check>,
}

impl ShapingReport {
    /// Increase of the mean log-norm between the last two depths.
    pub fn final_increments(&self) -> (f64, f64) {
        (last_increment(&self.unshaped), last_increment(&self.shaped))
    }
}

fn last_increment(s: &Series) -> f64 {
    let m = s.means();
    match m.len() {
        0 | 1 => f64::NAN,
        n => m[n - 1] - m[n - 2],
    }
}

/// Mean first-layer log gradient norm against depth for one gain schedule,
/// on the Gaussian probes of the rate sweep.
pub fn depth_sweep(
    base: &NetworkConfig,
    depths: &[usize],
    seeds: usize,
    gain: GainSchedule,
    name: &str,
    exec: Exec,
) -> Result<Series> {
    let values = try_map_indexed(exec, depths.len() * seeds, |i| {
        let (d, s) = (i / seeds, i % seeds);
        let (net_seed, data_seed) = repetition_seeds(base.seed, s);
        let cfg = NetworkConfig { depth: depths[d], gain, seed: net_seed, ..base.clone() };
        let (x0, labels) = gaussian_probe(&cfg, data_seed)?;
        Ok::<_, anyhow::Error>(gradient_norms_at_init(&cfg, &x0, &labels)?[0].ln())
    })?;
    Ok(Series::from_samples(
        name,
        depths.iter().enumerate().map(|(d, &depth)| (depth as f64, &values[d * seeds..(d + 1) * seeds])),
    ))
}

fn sweep_table(m: &[RateMeasurement]) -> String {
    m.iter().map(|r| format!("alpha {}: R = {:.3e}", r.alpha, r.rate)).collect::<Vec<_>>().join(", ")
}

/// Runs the whole shaping pipeline at the first width of the spec.
pub fn run_shaping_suite(spec: &ExperimentSpec, exec: Exec) -> Result<ShapingReport> {
    let width = spec.widths[0];
    let mut depths = spec.depths.clone();
    depths.sort_unstable();
    let base = spec.network_at(width, spec.rate_depth);
    let activation = base.activation;

    let measurements = spec
        .alphas
        .iter()
        .map(|&alpha| measure_rate(&base, spec.rate_layer, alpha, spec.seeds, exec))
        .collect::<bnlab_core::Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    let (fit, schedule) = if activation.is_identity() {
        let worst = measurements.iter().map(|m| m.rate.abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "identity control",
            worst < NEGLIGIBLE_RATE,
            format!("largest |R| = {worst:.3e}; gain schedule left constant"),
        ));
        (None, GainSchedule::Constant { alpha: 1.0 })
    } else {
        let fit = fit_power_law(&measurements)
            .with_context(|| format!("power-law fit failed on the sweep [{}]", sweep_table(&measurements)))?;
        checks.push(Check::new("fitted c2 > 0", fit.c2 > 0.0, format!("c1 = {:.4e}, c2 = {:.4}", fit.c1, fit.c2)));
        if fit.c2 <= 0.0 {
            bail!("fitted exponent c2 = {} is not positive on the sweep [{}]", fit.c2, sweep_table(&measurements));
        }
        let schedule = gain_schedule_from_fit(&fit, spec.gain_k)?;
        (Some(fit), schedule)
    };

    let sweep_base = NetworkConfig { depth: depths[0], ..base.clone() };
    let unshaped =
        depth_sweep(&sweep_base, &depths, spec.seeds, GainSchedule::Constant { alpha: 1.0 }, "unshaped", exec)?;
    let shaped = depth_sweep(&sweep_base, &depths, spec.seeds, schedule, "shaped", exec)?;

    let mut report = ShapingReport { activation, width, measurements, fit, schedule, unshaped, shaped, checks };
    if !activation.is_identity() && depths.len() >= 2 {
        let (u, s) = report.final_increments();
        let n = depths.len();
        report.checks.push(Check::new(
            format!("shaped increment L={}..{} < half unshaped", depths[n - 2], depths[n - 1]),
            s < 0.5 * u,
            format!("shaped {s:.4e}, unshaped {u:.4e}"),
        ));
    }
    Ok(report)
}

pub fn write_shaping_outputs(spec: &ExperimentSpec, report: &ShapingReport) -> Result<()> {
    let mut rates = format!("{}\n", RateMeasurement::CSV_HEADER);
    for m in &report.measurements {
        rates.push_str(&m.csv_rows());
    }
    write_file(&spec.out_dir, "rates.csv", &rates)?;

    let mut fit = String::from("c1,c2,residual,n_points,alpha_min,alpha_max,gain_k,exponent,cumulative_bound\n");
    if let (Some(f), GainSchedule::PowerLaw { exponent }) = (&report.fit, report.schedule) {
        let _ = writeln!(
            fit,
            "{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e}",
            f.c1,
            f.c2,
            f.residual,
            f.n_points,
            f.alpha_min,
            f.alpha_max,
            spec.gain_k,
            exponent,
            cumulative_rate_bound(f, spec.gain_k)
        );
    }
    write_file(&spec.out_dir, "fit.csv", &fit)?;
    write_json(&spec.out_dir, "schedule.json", &report.schedule)?;

    let mut sweep = String::from("schedule,L,mean_log_grad_norm,stderr\n");
    for s in [&report.unshaped, &report.shaped] {
        for p in &s.points {
            let _ = writeln!(sweep, "{},{},{:e},{:e}", s.name, p.x, p.mean, p.stderr);
        }
        emit_plot_data(s, &spec.out_dir.join(format!("grad_{}.dat", s.name)))?;
    }
    write_file(&spec.out_dir, "shaped_sweep.csv", &sweep)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentKind;

    fn small(activation: &str) -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Shaping);
        spec.apply_kv(&format!(
            "width = 16\nwidths = 16\nactivation = {activation}\nalphas = 0.3,0.5,0.7,0.85,1.0\n\
             rate_layer = 12\nrate_depth = 16\ndepths = 8, 16\nseeds = 2"
        ))
        .unwrap();
        spec
    }

    #[test]
    fn tanh_pipeline_runs_end_to_end() {
        let r = run_shaping_suite(&small("tanh"), Exec::Parallel).unwrap();
        assert_eq!(r.measurements.len(), 5);
        assert!(r.fit.as_ref().unwrap().c2 > 0.0, "{:?}", r.fit);
        assert!(matches!(r.schedule, GainSchedule::PowerLaw { .. }));
        assert_eq!(r.shaped.points.len(), 2);
    }

    #[test]
    fn identity_control_is_a_no_op() {
        let r = run_shaping_suite(&small("identity"), Exec::Parallel).unwrap();
        assert!(r.fit.is_none());
        assert_eq!(r.schedule, GainSchedule::Constant { alpha: 1.0 });
        assert_eq!(r.shaped, Series { name: "shaped".into(), ..r.unshaped.clone() });
        assert!(r.checks[0].passed, "{:?}", r.checks);
    }
}
