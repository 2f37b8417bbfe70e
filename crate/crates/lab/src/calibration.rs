//! The frozen decay-rate constant `C_cal` and its estimator.

use bnlab_core::stats::fit_line;

const CALIBRATION_FILE: &str = include_str!("../calibration.kv");

/// `c_cal` from the calibration file shipped with the crate.
pub fn frozen_c_cal() -> f64 {
    parse_c_cal(CALIBRATION_FILE).expect("calibration.kv must define c_cal")
}

pub fn parse_c_cal(text: &str) -> Option<f64> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "c_cal")
        .and_then(|(_, v)| v.trim().parse().ok())
}

/// Decay length `k = c_cal * d^2 * (1 + d * phi_0)`.
pub fn decay_length(c_cal: f64, d: usize, phi0: f64) -> f64 {
    let d = d as f64;
    c_cal * d * d * (1.0 + d * phi0)
}

/// Least-squares `c_cal` from a mean gap curve `gaps[l]`, `l = 0..=L`.
///
/// Fits `log gap` against `l` over the layers whose gap is above `floor`,
/// turns the slope into a decay length and divides out `d^2 (1 + d phi_0)`.
pub fn estimate_c_cal(gaps: &[f64], d: usize, floor: f64) -> Option<f64> {
    let phi0 = *gaps.first()?;
    let (x, y): (Vec<f64>, Vec<f64>) =
        gaps.iter().enumerate().filter(|(_, &g)| g > floor && g.is_finite()).map(|(l, &g)| (l as f64, g.ln())).unzip();
    let line = fit_line(&x, &y)?;
    if line.slope >= 0.0 {
        return None;
    }
    Some(-1.0 / line.slope / decay_length(1.0, d, phi0))
}
