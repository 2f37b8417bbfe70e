//! Seeded samplers for Gaussian and Haar-orthogonal matrices.

use super::matrix::RealMatrix;
use super::rng::RngHandle;
use crate::error::{Error, Result};

/// `rows x cols` matrix of i.i.d. `N(0, variance)` entries.
pub fn sample_gaussian_rect(rows: usize, cols: usize, variance: f64, rng: &mut RngHandle) -> Result<RealMatrix> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    let sd = variance.sqrt();
    Ok(RealMatrix::from_fn(rows, cols, |_, _| sd * rng.normal()))
}

/// `d x d` matrix of i.i.d. `N(0, variance)` entries.
pub fn sample_gaussian(d: usize, variance: f64, rng: &mut RngHandle) -> Result<RealMatrix> {
    sample_gaussian_rect(d, d, variance, rng)
}

/// Haar-distributed `d x d` orthogonal matrix.
///
/// QR of a standard Gaussian matrix, with every column of `Q` multiplied by
/// the sign of the matching diagonal entry of `R`. Without that correction
/// the distribution depends on the sign convention of the QR routine and is
/// not Haar.
pub fn sample_haar_orthogonal(d: usize, rng: &mut RngHandle) -> Result<RealMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(orthonormal_columns(d, d, rng))
}

/// `rows x cols` matrix with orthonormal rows (`rows <= cols`), distributed as
/// the first `rows` rows of a Haar orthogonal `cols x cols` matrix.
pub fn sample_orthonormal_rows(rows: usize, cols: usize, rng: &mut RngHandle) -> Result<RealMatrix> {
    if rows == 0 || rows > cols {
        return Err(Error::InvalidArgument(format!("orthonormal rows need 1 <= rows <= cols, got {rows}x{cols}")));
    }
    Ok(orthonormal_columns(cols, rows, rng).transpose())
}

/// `m x k` (k <= m) with Haar-distributed orthonormal columns.
fn orthonormal_columns(m: usize, k: usize, rng: &mut RngHandle) -> RealMatrix {
    let g = RealMatrix::from_fn(m, k, |_, _| rng.normal()).to_nalgebra();
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    RealMatrix::from_nalgebra(&q)
}
