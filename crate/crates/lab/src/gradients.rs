//! First-layer gradient norm against depth, across initialisations, input
//! batches and normalisation variants.

use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use bnlab_core::databatch::{synth_batch, SynthKind};
use bnlab_core::netfwd::{BnVariant, NetworkConfig, WeightInit};
use bnlab_core::par::{try_map_indexed, Exec};
use bnlab_core::shaping::{gradient_norms_at_init, repetition_seeds};
use bnlab_core::specmat::RngHandle;
use bnlab_core::stats::{fit_line, Moments};

use crate::output::{write_file, Check};
use crate::series::{emit_plot_data, Series};
use crate::spec::ExperimentSpec;

/// Half-width of the band of slopes counted as bounded gradients.
pub const BOUNDED_SLOPE: f64 = 0.01;

/// One line of a sweep: an initialisation, normalisation and input kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    pub init: ArmInit,
    pub bn: BnVariant,
    pub input: SynthKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmInit {
    Orthogonal,
    /// `N(0, 1/d)` entries.
    Gaussian,
}

impl Arm {
    fn config(&self, spec: &ExperimentSpec, width: usize, depth: usize) -> NetworkConfig {
        let mut cfg = spec.network_at(width, depth);
        cfg.bn = self.bn;
        cfg.weight_init = match self.init {
            ArmInit::Orthogonal => WeightInit::HaarOrthogonal,
            ArmInit::Gaussian => WeightInit::Gaussian { variance: 1.0 / width as f64 },
        };
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub width: usize,
    pub depths: Vec<usize>,
    /// `log ||dL/dW_1||_F` indexed by depth, then seed.
    pub log_norms: Vec<Vec<f64>>,
    /// Mean log-norm against depth with a 95% band.
    pub series: Series,
    /// Affine slope of the mean log-norm per layer of depth.
    pub slope: f64,
    /// Standard error of the per-seed slopes.
    pub slope_stderr: f64,
}

impl ArmResult {
    /// Differences of the mean log-norm between consecutive depths.
    pub fn increments(&self) -> Vec<f64> {
        self.series.means().windows(2).map(|p| p[1] - p[0]).collect()
    }

    pub fn bounded(&self) -> bool {
        self.slope.abs() < BOUNDED_SLOPE
    }

    pub fn exploding(&self) -> bool {
        self.slope > BOUNDED_SLOPE && self.increments().iter().all(|&i| i > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSweep {
    pub results: Vec<ArmResult>,
    pub checks: Vec<Check>,
}

impl GradientSweep {
    pub fn find(&self, arm: &str, width: usize) -> Option<&ArmResult> {
        self.results.iter().find(|r| r.arm.name == arm && r.width == width)
    }
}

/// Log first-layer gradient norm of one network at initialisation.
pub fn first_layer_log_norm(cfg: &NetworkConfig, input: SynthKind, data_seed: u64) -> Result<f64> {
    let batch = synth_batch(input, cfg.width, cfg.batch, cfg.classes, &mut RngHandle::new(data_seed))?;
    let norms = gradient_norms_at_init(cfg, &batch.data, &batch.labels)?;
    Ok(norms[0].ln())
}

/// Sweeps every arm over the spec's widths, depths and seeds. Jobs run on
/// the pool and are collected in `(width, arm, depth, seed)` order.
pub fn sweep_arms(spec: &ExperimentSpec, arms: &[Arm], exec: Exec) -> Result<Vec<ArmResult>> {
    let mut depths = spec.depths.clone();
    depths.sort_unstable();
    let (nd, ns) = (depths.len(), spec.seeds);
    let per_width = arms.len() * nd * ns;
    let values = try_map_indexed(exec, spec.widths.len() * per_width, |i| {
        let (w, rest) = (i / per_width, i % per_width);
        let (a, d, s) = (rest / (nd * ns), rest / ns % nd, rest % ns);
        let mut cfg = arms[a].config(spec, spec.widths[w], depths[d]);
        let (net_seed, data_seed) = repetition_seeds(spec.network.seed, s);
        cfg.seed = net_seed;
        first_layer_log_norm(&cfg, arms[a].input, data_seed)
    })?;

    let xs: Vec<f64> = depths.iter().map(|&d| d as f64).collect();
    let mut out = Vec::new();
    for (w, &width) in spec.widths.iter().enumerate() {
        for (a, arm) in arms.iter().enumerate() {
            let base = w * per_width + a * nd * ns;
            let log_norms: Vec<Vec<f64>> =
                (0..nd).map(|d| values[base + d * ns..base + (d + 1) * ns].to_vec()).collect();
            let series = Series::from_samples(
                format!("{}_d{width}", arm.name),
                xs.iter().copied().zip(log_norms.iter().map(Vec::as_slice)),
            );
            let slope = fit_line(&xs, &series.means()).map_or(f64::NAN, |f| f.slope);
            let per_seed: Moments = (0..ns)
                .filter_map(|s| fit_line(&xs, &log_norms.iter().map(|v| v[s]).collect::<Vec<_>>()))
                .map(|f| f.slope)
                .collect();
            out.push(ArmResult {
                arm: arm.clone(),
                width,
                depths: depths.clone(),
                log_norms,
                series,
                slope,
                slope_stderr: if ns > 1 { per_seed.std_error() } else { 0.0 },
            });
        }
    }
    Ok(out)
}

fn other_bn(bn: BnVariant) -> BnVariant {
    match bn {
        BnVariant::Simplified => BnVariant::Standard,
        BnVariant::Standard => BnVariant::Simplified,
    }
}

fn bounded_check(r: &ArmResult) -> Check {
    Check::new(
        format!("{} d={} bounded", r.arm.name, r.width),
        r.bounded(),
        format!("slope {:.3e} per layer (band +-{BOUNDED_SLOPE})", r.slope),
    )
}

fn exploding_check(r: &ArmResult) -> Check {
    Check::new(
        format!("{} d={} explodes", r.arm.name, r.width),
        r.exploding(),
        format!("slope {:.3e} per layer, increments {:?}", r.slope, fmt_vec(&r.increments())),
    )
}

fn fmt_vec(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3e}")).collect()
}

/// Slopes agree when they differ by less than three combined standard
/// errors, floored at the bounded-band half-width.
fn agreement_check(a: &ArmResult, b: &ArmResult) -> Check {
    let diff = (a.slope - b.slope).abs();
    let noise = (3.0 * a.slope_stderr.hypot(b.slope_stderr)).max(BOUNDED_SLOPE);
    Check::new(
        format!("{} vs {} d={} agree", a.arm.name, b.arm.name, a.width),
        diff <= noise,
        format!("slopes {:.3e} and {:.3e}, noise band {noise:.3e}", a.slope, b.slope),
    )
}

/// Orthogonal against Gaussian `N(0, 1/d)` weights, each under the
/// configured normalisation and the other variant.
pub fn run_gradient_sweep(spec: &ExperimentSpec, exec: Exec) -> Result<GradientSweep> {
    let bn = spec.network.bn;
    let arm = |name: &str, init, bn| Arm { name: name.into(), init, bn, input: spec.input };
    let (alt_o, alt_g) = (format!("orthogonal_{}", other_bn(bn).name()), format!("gaussian_{}", other_bn(bn).name()));
    let arms = vec![
        arm("orthogonal", ArmInit::Orthogonal, bn),
        arm("gaussian", ArmInit::Gaussian, bn),
        arm(&alt_o, ArmInit::Orthogonal, other_bn(bn)),
        arm(&alt_g, ArmInit::Gaussian, other_bn(bn)),
    ];
    let results = sweep_arms(spec, &arms, exec)?;
    let mut checks = Vec::new();
    for chunk in results.chunks(arms.len()) {
        checks.push(bounded_check(&chunk[0]));
        checks.push(exploding_check(&chunk[1]));
        checks.push(agreement_check(&chunk[0], &chunk[2]));
        checks.push(agreement_check(&chunk[1], &chunk[3]));
    }
    Ok(GradientSweep { results, checks })
}

/// Orthogonal weights on the configured batch against the same batch with
/// one duplicated sample.
pub fn run_degenerate(spec: &ExperimentSpec, exec: Exec) -> Result<GradientSweep> {
    let bn = spec.network.bn;
    let degenerate = match spec.input {
        d @ SynthKind::Duplicated { .. } => d,
        _ => SynthKind::Duplicated { samples: 1, copies: 2 },
    };
    let full = if matches!(spec.input, SynthKind::Duplicated { .. }) { SynthKind::Gaussian } else { spec.input };
    let arms = vec![
        Arm { name: "full_rank".into(), init: ArmInit::Orthogonal, bn, input: full },
        Arm { name: "degenerate".into(), init: ArmInit::Orthogonal, bn, input: degenerate },
    ];
    let results = sweep_arms(spec, &arms, exec)?;
    let mut checks = Vec::new();
    for pair in results.chunks(2) {
        checks.push(bounded_check(&pair[0]));
        checks.push(Check::new(
            format!("degenerate d={} leaves the bounded band", pair[1].width),
            pair[1].slope > BOUNDED_SLOPE,
            format!("slope {:.3e} per layer (full rank {:.3e})", pair[1].slope, pair[0].slope),
        ));
    }
    Ok(GradientSweep { results, checks })
}

pub fn write_gradient_outputs(spec: &ExperimentSpec, sweep: &GradientSweep) -> Result<()> {
    let mut norms = String::from("arm,init,bn,input,d,L,seed,log_grad_norm\n");
    let mut slopes = String::from("arm,d,slope,slope_stderr\n");
    for r in &sweep.results {
        emit_plot_data(&r.series, &spec.out_dir.join(format!("grad_{}_d{}.dat", r.arm.name, r.width)))?;
        for (d, per_seed) in r.depths.iter().zip(&r.log_norms) {
            for (s, v) in per_seed.iter().enumerate() {
                let seed = repetition_seeds(spec.network.seed, s).0;
                let _ = writeln!(
                    norms,
                    "{},{:?},{},{},{},{},{},{:e}",
                    r.arm.name,
                    r.arm.init,
                    r.arm.bn.name(),
                    r.arm.input.name(),
                    r.width,
                    d,
                    seed,
                    v
                );
            }
        }
        let _ = writeln!(slopes, "{},{},{:e},{:e}", r.arm.name, r.width, r.slope, r.slope_stderr);
    }
    write_file(&spec.out_dir, "grad_norms.csv", &norms)?;
    write_file(&spec.out_dir, "slopes.csv", &slopes)?;
    Ok(())
}
