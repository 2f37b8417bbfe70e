//! Gradient explosion rate of shaped activations, its power-law fit in the
//! gain, and the resulting per-layer gain schedules.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netfwd::{forward, Activation, GainSchedule, NetworkConfig, Weights};
use crate::netgrad::{backward, LossKind};
use crate::par::{try_map_indexed, Exec};
use crate::specmat::{sample_gaussian_rect, split_seed, RealMatrix, RngHandle};
use crate::stats::{fit_line, Moments};

/// Layer gap of the rate measurement.
pub const RATE_GAP: usize = 10;

/// Minimum number of distinct gains in a power-law fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Frobenius norms of `dL/dW_l` at initialisation for every layer, with
/// weights drawn from `config.seed` and cross-entropy loss.
pub fn gradient_norms_at_init(config: &NetworkConfig, x0: &RealMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    let weights = Weights::init(config, x0.rows())?;
    let tape = forward(config, x0, &weights)?;
    Ok(backward(&tape, &weights, labels, LossKind::CrossEntropySoftmax)?.layer_norms())
}

/// Gaussian `N(0, 1)` input of shape `width x batch` and uniform labels.
pub fn gaussian_probe(config: &NetworkConfig, seed: u64) -> Result<(RealMatrix, Vec<usize>)> {
    let mut rng = RngHandle::new(seed);
    let x = sample_gaussian_rect(config.width, config.batch, 1.0, &mut rng)?;
    let labels = (0..config.batch).map(|_| rng.below(config.classes)).collect();
    Ok((x, labels))
}

/// Network and input seeds of repetition `rep` under a base seed.
pub fn repetition_seeds(base: u64, rep: usize) -> (u64, u64) {
    (split_seed(base, 2 * rep as u64), split_seed(base, 2 * rep as u64 + 1))
}

/// Explosion rate `(log g_{l-10} - log g_l) / 10` from gradient norms `g`
/// indexed from layer 1. Positive when gradients grow towards the input.
pub fn rate_from_norms(norms: &[f64], layer: usize) -> Result<f64> {
    if layer <= RATE_GAP || layer > norms.len() {
        return Err(Error::InvalidArgument(format!(
            "rate layer must lie in {}..={}, got {layer}",
            RATE_GAP + 1,
            norms.len()
        )));
    }
    Ok((norms[layer - 1 - RATE_GAP].ln() - norms[layer - 1].ln()) / RATE_GAP as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    pub activation: Activation,
    pub width: usize,
    pub depth: usize,
    pub layer: usize,
    pub alpha: f64,
    /// Mean over repetitions.
    pub rate: f64,
    pub stderr: f64,
    /// `(network seed, rate)` of every repetition.
    pub samples: Vec<(u64, f64)>,
}

impl RateMeasurement {
    pub const CSV_HEADER: &'static str = "activation,d,L,layer,alpha,rate,seed";

    /// One CSV line per repetition, without header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (seed, rate) in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{:e},{}",
                self.activation.name(),
                self.width,
                self.depth,
                self.layer,
                self.alpha,
                rate,
                seed
            );
        }
        s
    }
}

/// Mean rate at `layer` over `seeds` random networks with constant gain
/// `alpha`, measured at initialisation.
pub fn measure_rate(
    config: &NetworkConfig,
    layer: usize,
    alpha: f64,
    seeds: usize,
    exec: Exec,
) -> Result<RateMeasurement> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("gain must be positive, got {alpha}")));
    }
    if layer > config.depth {
        return Err(Error::InvalidArgument(format!("layer {layer} exceeds depth {}", config.depth)));
    }
    if seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut cfg = config.clone();
    cfg.gain = GainSchedule::Constant { alpha };
    let samples = try_map_indexed(exec, seeds, |rep| {
        let (net_seed, data_seed) = repetition_seeds(config.seed, rep);
        let mut cfg = cfg.clone();
        cfg.seed = net_seed;
        let (x0, labels) = gaussian_probe(&cfg, data_seed)?;
        let norms = gradient_norms_at_init(&cfg, &x0, &labels)?;
        Ok::<_, Error>((net_seed, rate_from_norms(&norms, layer)?))
    })?;
    let m: Moments = samples.iter().map(|s| s.1).collect();
    Ok(RateMeasurement {
        activation: config.activation,
        width: config.width,
        depth: config.depth,
        layer,
        alpha,
        rate: m.mean,
        stderr: m.std_error(),
        samples,
    })
}

/// `R(alpha) ~ c1 * alpha^c2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c1: f64,
    pub c2: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub n_points: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

/// Least squares of `log R` against `log alpha`. Points with `R <= 0` are
/// dropped; at least [`MIN_FIT_POINTS`] distinct gains must remain.
pub fn fit_power_law(measurements: &[RateMeasurement]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = measurements
        .iter()
        .filter(|m| m.rate > 0.0 && m.rate.is_finite() && m.alpha > 0.0)
        .map(|m| (m.alpha, m.rate))
        .collect();
    fit_power_law_points(&pts)
}

/// [`fit_power_law`] on raw `(alpha, rate)` pairs.
pub fn fit_power_law_points(points: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|&(a, r)| r > 0.0 && a > 0.0).collect();
    let mut alphas: Vec<f64> = pts.iter().map(|p| p.0).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    if alphas.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientFitData { needed: MIN_FIT_POINTS, got: alphas.len() });
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&x, &y).ok_or(Error::InsufficientFitData { needed: MIN_FIT_POINTS, got: 1 })?;
    Ok(RateFit {
        c1: line.intercept.exp(),
        c2: line.slope,
        residual: line.rms_residual,
        n_points: pts.len(),
        alpha_min: alphas[0],
        alpha_max: alphas[alphas.len() - 1],
    })
}

/// Power-law schedule `alpha_l = l^(-k/c2)`, which makes the predicted rate
/// at layer `l` equal to `c1 * l^(-k)`.
pub fn gain_schedule_from_fit(fit: &RateFit, k: f64) -> Result<GainSchedule> {
    if fit.c2.is_nan() || fit.c2 <= 0.0 {
        return Err(Error::InvalidArgument(format!("fitted exponent must be positive, got {}", fit.c2)));
    }
    if k.is_nan() || k <= 1.0 {
        return Err(Error::InvalidArgument(format!("k must exceed 1, got {k}")));
    }
    Ok(GainSchedule::PowerLaw { exponent: k / fit.c2 })
}

/// Predicted cumulative rate `sum_{l=1}^{L} c1 * l^(-k)`.
pub fn cumulative_rate(fit: &RateFit, k: f64, depth: usize) -> f64 {
    (1..=depth).map(|l| fit.c1 * (l as f64).powf(-k)).sum()
}

/// Depth-independent bound `c1 * k / (k - 1)` on [`cumulative_rate`].
pub fn cumulative_rate_bound(fit: &RateFit, k: f64) -> f64 {
    fit.c1 * k / (k - 1.0)
}
