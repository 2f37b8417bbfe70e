//! Closed-form Jacobians of the normalisation operators, applied row by row.
//!
//! For simplified BN each row `x` maps to `x / |x|` with Jacobian
//! `J = I/|x| - x x^T/|x|^3`. `J` is symmetric, so the same routine gives
//! both Jacobian-vector and vector-Jacobian products. The full operator is
//! block diagonal over rows and is never materialised.

use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

/// Implicit Jacobian block of one row: `(x, |x|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnJacobianBlock {
    pub row: Vec<f64>,
    pub norm: f64,
}

impl BnJacobianBlock {
    pub fn new(row: &[f64]) -> Result<Self> {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateRow { layer: None, row: 0 });
        }
        Ok(Self { row: row.to_vec(), norm })
    }

    /// `J g`
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        jvp_row(&self.row, self.norm, g, &mut out);
        out
    }

    /// Spectrum `{1/|x|` (multiplicity `n-1`)`, 0}`, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = vec![1.0 / self.norm; self.row.len()];
        if let Some(last) = ev.last_mut() {
            *last = 0.0;
        }
        ev
    }
}

fn jvp_row(x: &[f64], norm: f64, g: &[f64], out: &mut [f64]) {
    let dot: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    let c = dot / (norm * norm * norm);
    for ((o, &gi), &xi) in out.iter_mut().zip(g).zip(x) {
        *o = gi / norm - c * xi;
    }
}

/// Row `i` of the result is `J_i G_i`, where `J_i` is the simplified-BN
/// Jacobian at row `i` of `h`.
pub fn bn_jacobian_apply(h: &RealMatrix, g: &RealMatrix) -> Result<RealMatrix> {
    bn_jacobian_apply_with_norms(h, &h.row_norms(), g)
}

/// [`bn_jacobian_apply`] with precomputed row norms of `h`.
pub fn bn_jacobian_apply_with_norms(h: &RealMatrix, norms: &[f64], g: &RealMatrix) -> Result<RealMatrix> {
    if h.shape() != g.shape() || norms.len() != h.rows() {
        return Err(Error::Shape(format!("jacobian: H is {:?}, G is {:?}", h.shape(), g.shape())));
    }
    let mut out = RealMatrix::zeros(h.rows(), h.cols());
    for (i, &n) in norms.iter().enumerate() {
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateRow { layer: None, row: i });
        }
        jvp_row(h.row(i), n, g.row(i), out.row_mut(i));
    }
    Ok(out)
}

/// Operator norm of the simplified-BN Jacobian at `h`: `max_i 1/|h_i|`.
/// `+inf` when some row is zero.
pub fn bn_jacobian_opnorm(h: &RealMatrix) -> f64 {
    opnorm_from_scales(&h.row_norms())
}

/// `max_i 1/s_i`; also the operator norm of the standard-BN Jacobian when
/// `s_i = sqrt(var_i + eps)` and the batch has at least three samples.
pub fn opnorm_from_scales(scales: &[f64]) -> f64 {
    scales.iter().fold(0.0, |m: f64, &s| if s == 0.0 { f64::INFINITY } else { m.max(1.0 / s) })
}

/// Vector-Jacobian product of standard BN for one row, given the normalised
/// row `xhat` and its scale `s = sqrt(var + eps)`:
/// `(g - mean(g) - xhat * mean(g * xhat)) / s`.
pub fn bn_standard_vjp_row(xhat: &[f64], s: f64, g: &[f64], out: &mut [f64]) {
    let n = g.len() as f64;
    let mean_g = g.iter().sum::<f64>() / n;
    let mean_gx = g.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
    for ((o, &gi), &xi) in out.iter_mut().zip(g).zip(xhat) {
        *o = (gi - mean_g - xi * mean_gx) / s;
    }
}

/// Standard-BN vector-Jacobian product for every row.
pub fn bn_standard_vjp(xhat: &RealMatrix, scales: &[f64], g: &RealMatrix) -> Result<RealMatrix> {
    if xhat.shape() != g.shape() || scales.len() != xhat.rows() {
        return Err(Error::Shape(format!("standard vjp: {:?} vs {:?}", xhat.shape(), g.shape())));
    }
    let mut out = RealMatrix::zeros(g.rows(), g.cols());
    for (i, &s) in scales.iter().enumerate() {
        bn_standard_vjp_row(xhat.row(i), s, g.row(i), out.row_mut(i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfwd::{bn_simplified, bn_standard_with_scales};
    use crate::specmat::RngHandle;

    #[test]
    fn annihilates_own_direction() {
        let h = RealMatrix::from_rows(&[vec![2.5, 0.0, 0.0]]).unwrap();
        let g = RealMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(bn_jacobian_apply(&h, &g).unwrap().max_abs() < 1e-16);
    }

    #[test]
    fn orthogonal_cotangent_is_scaled() {
        let h = RealMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let g = RealMatrix::from_rows(&[vec![-4.0, 3.0]]).unwrap();
        let out = bn_jacobian_apply(&h, &g).unwrap();
        assert!((out[(0, 0)] + 0.8).abs() < 1e-15 && (out[(0, 1)] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn opnorm_examples() {
        assert_eq!(bn_jacobian_opnorm(&RealMatrix::identity(4)), 1.0);
        assert_eq!(bn_jacobian_opnorm(&RealMatrix::diag(&[2.0, 1.0])), 1.0);
        assert_eq!(bn_jacobian_opnorm(&RealMatrix::zeros(2, 2)), f64::INFINITY);
    }

    #[test]
    fn zero_row_is_reported() {
        let h = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let err = bn_jacobian_apply(&h, &h).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow { row: 1, .. }));
    }

    #[test]
    fn block_spectrum() {
        let b = BnJacobianBlock::new(&[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(b.eigenvalues(), vec![1.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert!(b.apply(&[1.0, 2.0, 2.0]).iter().all(|v| v.abs() < 1e-15));
        assert!(BnJacobianBlock::new(&[0.0, 0.0]).is_err());
    }

    fn central_difference(
        f: impl Fn(&RealMatrix) -> RealMatrix,
        h: &RealMatrix,
        dir: &RealMatrix,
        step: f64,
    ) -> RealMatrix {
        let mut plus = h.clone();
        plus.axpy(step, dir);
        let mut minus = h.clone();
        minus.axpy(-step, dir);
        f(&plus).sub(&f(&minus)).scale(0.5 / step)
    }

    #[test]
    fn simplified_matches_finite_differences() {
        let mut rng = RngHandle::new(21);
        let h = RealMatrix::from_fn(4, 6, |_, _| rng.normal());
        let g = RealMatrix::from_fn(4, 6, |_, _| rng.normal());
        let fd = central_difference(|m| bn_simplified(m).unwrap(), &h, &g, 1e-6);
        let an = bn_jacobian_apply(&h, &g).unwrap();
        assert!(fd.sub(&an).frobenius_norm() <= 1e-5 * an.frobenius_norm());
    }

    #[test]
    fn standard_vjp_matches_finite_differences() {
        // <g, J v> = <J^T g, v> checked against a difference quotient along v
        let mut rng = RngHandle::new(8);
        let h = RealMatrix::from_fn(3, 7, |_, _| 1.0 + rng.normal());
        let g = RealMatrix::from_fn(3, 7, |_, _| rng.normal());
        let v = RealMatrix::from_fn(3, 7, |_, _| rng.normal());
        let (xhat, scales) = bn_standard_with_scales(&h);
        let vjp = bn_standard_vjp(&xhat, &scales, &g).unwrap();
        let jv = central_difference(|m| bn_standard_with_scales(m).0, &h, &v, 1e-6);
        let lhs: f64 = g.hadamard(&jv).as_slice().iter().sum();
        let rhs: f64 = vjp.hadamard(&v).as_slice().iter().sum();
        assert!((lhs - rhs).abs() < 1e-6 * rhs.abs().max(1.0), "{lhs} {rhs}");
    }
}
