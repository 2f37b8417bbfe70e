//! Plot-ready series: one point per x with a mean and an optional 95% band.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use bnlab_core::stats::Moments;

/// Normal quantile of a two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Number of runs averaged into the point.
    pub count: u64,
}

impl SeriesPoint {
    pub fn from_moments(x: f64, m: &Moments) -> Self {
        Self { x, mean: m.mean, stderr: if m.count > 1 { m.std_error() } else { 0.0 }, count: m.count }
    }

    pub fn band(&self) -> (f64, f64) {
        (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<SeriesPoint>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), points: Vec::new() }
    }

    /// Series from `(x, samples)` pairs.
    pub fn from_samples<'a>(name: impl Into<String>, data: impl IntoIterator<Item = (f64, &'a [f64])>) -> Self {
        let points =
            data.into_iter().map(|(x, ys)| SeriesPoint::from_moments(x, &ys.iter().copied().collect())).collect();
        Self { name: name.into(), points }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn has_band(&self) -> bool {
        self.points.iter().any(|p| p.count > 1)
    }

    /// Whitespace-separated `x y` lines, extended by `y_lo y_hi` when any
    /// point averages several runs.
    pub fn to_plot_text(&self) -> String {
        let band = self.has_band();
        let mut s = String::new();
        for p in &self.points {
            if band {
                let (lo, hi) = p.band();
                let _ = writeln!(s, "{} {:e} {:e} {:e}", p.x, p.mean, lo, hi);
            } else {
                let _ = writeln!(s, "{} {:e}", p.x, p.mean);
            }
        }
        s
    }
}

/// Writes `series` as gnuplot-compatible text.
pub fn emit_plot_data(series: &Series, path: &Path) -> Result<()> {
    if series.points.is_empty() {
        bail!("series {:?} is empty", series.name);
    }
    std::fs::write(path, series.to_plot_text())?;
    Ok(())
}
