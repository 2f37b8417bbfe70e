//! Spectra of Gram matrices and the isometry gap.
//!
//! All quantities are computed from singular values in the log domain. The
//! determinant of a 100x100 Gram matrix routinely leaves the `f64` range, its
//! logarithm does not.

use serde::{Deserialize, Serialize};

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Singular values of `x`, sorted descending. Length `min(rows, cols)`.
pub fn singular_values(x: &RealMatrix) -> Vec<f64> {
    if x.rows() == 0 || x.cols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = x.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(x: &RealMatrix) -> usize {
    rank_from_singular_values(&singular_values(x))
}

pub fn rank_from_singular_values(sv: &[f64]) -> usize {
    rank_with_tolerance(sv, RANK_TOL)
}

/// Number of singular values at or above `rel_tol * sigma_max`.
pub fn rank_with_tolerance(sv: &[f64], rel_tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 0.0 || !top.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s >= rel_tol * top).count()
}

/// Eigenvalues of `X X^T` (descending) for a `d x n` matrix, padded with
/// zeros when `d > n`.
pub fn gram_eigenvalues(x: &RealMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = singular_values(x).into_iter().map(|s| s * s).collect();
    ev.resize(x.rows(), 0.0);
    ev
}

/// Isometry gap of a `d x n` matrix:
/// `log(tr(X X^T)/d) - (1/d) * sum_i log(lambda_i)`.
///
/// Returns `+inf` for rank-deficient input (including the zero matrix and any
/// `d > n`), never NaN.
pub fn isometry_gap(x: &RealMatrix) -> f64 {
    let d = x.rows();
    if d == 0 || x.rows() > x.cols() {
        return f64::INFINITY;
    }
    isometry_gap_from_singular_values(&singular_values(x), d)
}

fn isometry_gap_from_singular_values(sv: &[f64], d: usize) -> f64 {
    if sv.len() < d || rank_from_singular_values(sv) < d {
        return f64::INFINITY;
    }
    // Scale by the top singular value: the gap is scale invariant and this
    // keeps every log near zero for well-conditioned inputs.
    let top = sv[0];
    let (mut sum_sq, mut sum_log) = (0.0, 0.0);
    for &s in sv {
        let r = s / top;
        sum_sq += r * r;
        sum_log += 2.0 * r.ln();
    }
    let gap = (sum_sq / d as f64).ln() - sum_log / d as f64;
    gap.max(0.0)
}

/// `exp(-isometry_gap)`; zero for degenerate input.
pub fn isometry(x: &RealMatrix) -> f64 {
    (-isometry_gap(x)).exp()
}

/// Isometry gap from Gram eigenvalues directly.
pub fn isometry_gap_from_eigenvalues(eigenvalues: &[f64]) -> f64 {
    let d = eigenvalues.len();
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    if d == 0 || top <= 0.0 || eigenvalues.iter().any(|&l| l < RANK_TOL * RANK_TOL * top) {
        return f64::INFINITY;
    }
    let mean = eigenvalues.iter().map(|l| l / top).sum::<f64>() / d as f64;
    let mean_log = eigenvalues.iter().map(|l| (l / top).ln()).sum::<f64>() / d as f64;
    (mean.ln() - mean_log).max(0.0)
}

/// Spectrum of `X X^T` for a square `X` with derived isometry quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending eigenvalues of `X X^T`.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    /// `-inf` when any eigenvalue is numerically zero.
    pub log_det: f64,
    pub iso_gap: f64,
    pub lambda_min: f64,
}

pub fn spectral_summary(x: &RealMatrix) -> Result<SpectralSummary> {
    if !x.is_square() {
        return Err(Error::Shape(format!("spectral summary needs a square matrix, got {:?}", x.shape())));
    }
    let d = x.rows();
    let sv = singular_values(x);
    let full_rank = d > 0 && rank_from_singular_values(&sv) == d;
    let eigenvalues: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let trace = eigenvalues.iter().sum();
    let log_det = if full_rank { sv.iter().map(|s| 2.0 * s.ln()).sum() } else { f64::NEG_INFINITY };
    let iso_gap = isometry_gap_from_singular_values(&sv, d);
    let lambda_min = eigenvalues.last().copied().unwrap_or(0.0);
    Ok(SpectralSummary { eigenvalues, trace, log_det, iso_gap, lambda_min })
}

/// Scales `x` so that `tr(X X^T) = rows`, the normalisation every
/// batch-normalised representation carries.
pub fn trace_normalize(x: &RealMatrix) -> RealMatrix {
    let fro = x.frobenius_norm();
    if fro == 0.0 {
        return x.clone();
    }
    x.scale((x.rows() as f64).sqrt() / fro)
}
