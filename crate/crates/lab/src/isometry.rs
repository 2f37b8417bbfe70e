//! Isometry gap of representations along a linear network with Haar weights.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use bnlab_core::databatch::synth_batch;
use bnlab_core::netfwd::{layer_forward, WeightInit, Weights};
use bnlab_core::par::{try_map_indexed, Exec};
use bnlab_core::shaping::repetition_seeds;
use bnlab_core::specmat::{isometry_gap, numerical_rank, RngHandle};
use bnlab_core::stats::{fit_line, Moments};

use crate::calibration::{decay_length, estimate_c_cal};
use crate::output::{write_file, Check};
use crate::series::{emit_plot_data, Series, SeriesPoint};
use crate::spec::ExperimentSpec;

/// Allowed increase of the gap between consecutive layers.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Gaps below this are treated as converged when fitting decay rates.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRun {
    pub width: usize,
    pub seed: u64,
    /// `phi(X_l)` for `l = 0..=L`.
    pub gaps: Vec<f64>,
    /// Layers `l` with `phi(X_{l+1}) > phi(X_l) + MONOTONE_TOL`.
    pub increases: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthDecay {
    pub width: usize,
    pub depth: usize,
    pub runs: Vec<DecayRun>,
    /// Mean gap per layer with a 95% band over seeds.
    pub mean: Series,
    /// Mean of `phi(X_0) exp(-l / k)` over seeds.
    pub overlay: Series,
    /// Per-layer decay rate fitted to the log mean gap.
    pub fitted_rate: Option<f64>,
    /// `c_cal` that would make the overlay match the fitted rate.
    pub c_cal_estimate: Option<f64>,
}

impl WidthDecay {
    pub fn initial_mean(&self) -> f64 {
        self.mean.points[0].mean
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.points.last().map_or(f64::NAN, |p| p.mean)
    }

    /// `mean phi(X_L) / mean phi(X_0)`
    pub fn decay_ratio(&self) -> f64 {
        self.final_mean() / self.initial_mean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryDecay {
    pub c_cal: f64,
    pub widths: Vec<WidthDecay>,
    pub checks: Vec<Check>,
}

fn decay_run(spec: &ExperimentSpec, width: usize, depth: usize, rep: usize) -> Result<DecayRun> {
    let (net_seed, data_seed) = repetition_seeds(spec.network.seed, rep);
    let mut cfg = spec.network_at(width, depth);
    cfg.seed = net_seed;
    let x0 = synth_batch(spec.input, width, cfg.batch, cfg.classes, &mut RngHandle::new(data_seed))?.data;
    let phi0 = isometry_gap(&x0);
    if !phi0.is_finite() {
        bail!(
            "input batch ({}, seed {data_seed}) has rank {} < width {width}: its isometry gap is infinite and \
             no depth can orthogonalise it; use linearly independent samples with batch >= width",
            spec.input.name(),
            numerical_rank(&x0)
        );
    }
    let mut gaps = Vec::with_capacity(depth + 1);
    gaps.push(phi0);
    let mut x = x0;
    for l in 0..depth {
        let w = Weights::hidden(&cfg, width, l)?;
        x = layer_forward(&cfg, &w, &x, l)?;
        gaps.push(isometry_gap(&x));
    }
    let increases = gaps.windows(2).enumerate().filter(|(_, p)| p[1] > p[0] + MONOTONE_TOL).map(|(l, _)| l).collect();
    Ok(DecayRun { width, seed: net_seed, gaps, increases })
}

fn fitted_rate(gaps: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > GAP_FLOOR && g.is_finite())
        .map(|(l, &g)| (l as f64, g.ln()))
        .unzip();
    fit_line(&x, &y).map(|f| -f.slope)
}

/// Runs every `(width, seed)` pair of the spec to its largest depth.
pub fn run_isometry_decay(spec: &ExperimentSpec, exec: Exec) -> Result<IsometryDecay> {
    if !spec.network.activation.is_identity() {
        bail!("isometry decay needs the identity activation, got {}", spec.network.activation.name());
    }
    if spec.network.weight_init != WeightInit::HaarOrthogonal {
        bail!("isometry decay needs Haar orthogonal weights");
    }
    let depth = *spec.depths.iter().max().expect("validated spec has depths");
    let jobs: Vec<(usize, usize)> =
        spec.widths.iter().flat_map(|&w| (0..spec.seeds).map(move |rep| (w, rep))).collect();
    let runs = try_map_indexed(exec, jobs.len(), |i| decay_run(spec, jobs[i].0, depth, jobs[i].1))?;

    let mut widths = Vec::new();
    for (wi, &width) in spec.widths.iter().enumerate() {
        let runs: Vec<DecayRun> = runs[wi * spec.seeds..(wi + 1) * spec.seeds].to_vec();
        let mut mean = Series::new(format!("phi_d{width}"));
        let mut overlay = Series::new(format!("overlay_d{width}"));
        for l in 0..=depth {
            let m: Moments = runs.iter().map(|r| r.gaps[l]).collect();
            mean.points.push(SeriesPoint::from_moments(l as f64, &m));
            let o: Moments = runs
                .iter()
                .map(|r| r.gaps[0] * (-(l as f64) / decay_length(spec.c_cal, width, r.gaps[0])).exp())
                .collect();
            overlay.points.push(SeriesPoint { x: l as f64, mean: o.mean, stderr: 0.0, count: o.count });
        }
        let means = mean.means();
        widths.push(WidthDecay {
            width,
            depth,
            fitted_rate: fitted_rate(&means),
            c_cal_estimate: estimate_c_cal(&means, width, GAP_FLOOR),
            runs,
            mean,
            overlay,
        });
    }

    let mut checks = Vec::new();
    let bad: Vec<String> = widths
        .iter()
        .flat_map(|w| w.runs.iter())
        .filter(|r| !r.increases.is_empty())
        .map(|r| format!("d={} seed {} at layers {:?}", r.width, r.seed, r.increases))
        .collect();
    checks.push(Check::new(
        "monotone gap",
        bad.is_empty(),
        if bad.is_empty() { format!("{} runs non-increasing", runs.len()) } else { bad.join("; ") },
    ));
    for w in &widths {
        checks.push(Check::new(
            format!("decay d={}", w.width),
            w.final_mean() < w.initial_mean() || w.initial_mean() == 0.0,
            format!("mean phi {:.4e} -> {:.4e} (ratio {:.3e})", w.initial_mean(), w.final_mean(), w.decay_ratio()),
        ));
    }
    for pair in widths.windows(2) {
        if let (Some(a), Some(b)) = (pair[0].fitted_rate, pair[1].fitted_rate) {
            let (narrow, wide, ra, rb) = if pair[0].width < pair[1].width {
                (pair[0].width, pair[1].width, a, b)
            } else {
                (pair[1].width, pair[0].width, b, a)
            };
            checks.push(Check::new(
                format!("wider decays slower d={narrow} vs d={wide}"),
                rb < ra,
                format!("per-layer rate {ra:.4e} vs {rb:.4e}"),
            ));
        }
    }
    Ok(IsometryDecay { c_cal: spec.c_cal, widths, checks })
}

/// Writes `decay_d*.dat`, `overlay_d*.dat` and `runs_d*.csv`.
pub fn write_isometry_outputs(spec: &ExperimentSpec, result: &IsometryDecay) -> Result<()> {
    for w in &result.widths {
        emit_plot_data(&w.mean, &spec.out_dir.join(format!("decay_d{}.dat", w.width)))?;
        emit_plot_data(&w.overlay, &spec.out_dir.join(format!("overlay_d{}.dat", w.width)))?;
        let mut csv = String::from("seed,layer,phi\n");
        for r in &w.runs {
            for (l, g) in r.gaps.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{:e}", r.seed, l, g);
            }
        }
        write_file(&spec.out_dir, &format!("runs_d{}.csv", w.width), &csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{parse_input, ExperimentKind};

    fn small() -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Isometry);
        spec.apply_kv("widths = 6\ndepths = 40\nseeds = 3\nwidth = 6").unwrap();
        spec
    }

    #[test]
    fn gaps_decay_monotonically() {
        let r = run_isometry_decay(&small(), Exec::Sequential).unwrap();
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
        assert_eq!(r.widths[0].mean.points.len(), 41);
        assert!(r.widths[0].fitted_rate.unwrap() > 0.0);
    }

    #[test]
    fn orthogonal_input_stays_orthogonal() {
        let mut spec = small();
        spec.input = parse_input("orthogonal").unwrap();
        let r = run_isometry_decay(&spec, Exec::Sequential).unwrap();
        for run in &r.widths[0].runs {
            assert!(run.gaps.iter().all(|&g| g < 1e-12), "{:?}", run.gaps);
        }
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let mut spec = small();
        spec.input = parse_input("duplicated:1x2").unwrap();
        let err = run_isometry_decay(&spec, Exec::Sequential).unwrap_err().to_string();
        assert!(err.contains("rank 5 < width 6"), "{err}");
    }

    #[test]
    fn nonlinear_network_is_rejected() {
        let mut spec = small();
        spec.apply_kv("activation = tanh").unwrap();
        assert!(run_isometry_decay(&spec, Exec::Sequential).is_err());
    }
}
