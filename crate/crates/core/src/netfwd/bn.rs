//! Batch normalisation over the sample axis (rows of a `features x samples`
//! matrix).

use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

/// Variance floor of the standard operator.
pub const STANDARD_BN_EPS: f64 = 1e-5;

/// Row normalisation `diag(X X^T)^{-1/2} X`, with no mean subtraction and no
/// epsilon. Every output row has unit norm.
pub fn bn_simplified(x: &RealMatrix) -> Result<RealMatrix> {
    bn_simplified_with_norms(x).map(|(b, _)| b)
}

/// [`bn_simplified`] that also returns the input row norms.
pub fn bn_simplified_with_norms(x: &RealMatrix) -> Result<(RealMatrix, Vec<f64>)> {
    let norms = x.row_norms();
    if let Some(row) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::DegenerateRow { layer: None, row });
    }
    let mut out = x.clone();
    for (i, &n) in norms.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|v| *v /= n);
    }
    Ok((out, norms))
}

/// Standard batch normalisation without affine parameters: per-row mean
/// subtraction, then division by `sqrt(mean squared deviation + eps)`.
pub fn bn_standard(x: &RealMatrix) -> RealMatrix {
    bn_standard_with_scales(x).0
}

/// [`bn_standard`] that also returns each row's `sqrt(var + eps)`.
pub fn bn_standard_with_scales(x: &RealMatrix) -> (RealMatrix, Vec<f64>) {
    let n = x.cols() as f64;
    let mut out = x.clone();
    let mut scales = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / n;
        row.iter_mut().for_each(|v| *v -= mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        let s = (var + STANDARD_BN_EPS).sqrt();
        row.iter_mut().for_each(|v| *v /= s);
        scales.push(s);
    }
    (out, scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specmat::{isometry_gap, sample_haar_orthogonal, RngHandle};

    #[test]
    fn simplified_row_normalisation() {
        let x = RealMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 5.0]]).unwrap();
        let b = bn_simplified(&x).unwrap();
        let want = RealMatrix::from_rows(&[vec![0.6, 0.8], vec![0.0, 1.0]]).unwrap();
        assert!(b.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn simplified_fixes_orthogonal_input() {
        let w = sample_haar_orthogonal(6, &mut RngHandle::new(4)).unwrap();
        assert!(bn_simplified(&w).unwrap().max_abs_diff(&w) < 1e-14);
    }

    #[test]
    fn simplified_zero_row_is_an_error() {
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let err = bn_simplified(&x).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow { row: 1, .. }));
        assert!(err.to_string().contains("degenerate row"));
    }

    #[test]
    fn rotating_by_left_singular_vectors_gives_perfect_isometry() {
        // X = U S V^T  =>  BN(U^T X) = V^T
        let mut rng = RngHandle::new(11);
        let x = RealMatrix::from_fn(5, 5, |_, _| rng.normal());
        let svd = x.to_nalgebra().svd(true, true);
        let u = RealMatrix::from_nalgebra(svd.u.as_ref().unwrap());
        let vt = RealMatrix::from_nalgebra(svd.v_t.as_ref().unwrap());
        let b = bn_simplified(&u.t_matmul(&x)).unwrap();
        assert!(b.matmul_t(&b).max_abs_diff(&RealMatrix::identity(5)) < 1e-9);
        assert!(b.max_abs_diff(&vt) < 1e-9);
        assert!(isometry_gap(&b) < 1e-12);
    }

    #[test]
    fn standard_centres_and_scales() {
        let x = RealMatrix::from_rows(&[vec![1.0, -1.0], vec![5.0, 5.0]]).unwrap();
        let b = bn_standard(&x);
        let f = 1.0 / (1.0 + STANDARD_BN_EPS).sqrt();
        assert!((b[(0, 0)] - f).abs() < 1e-15 && (b[(0, 1)] + f).abs() < 1e-15);
        assert_eq!(b.row(1), &[0.0, 0.0]);
        assert!(b.is_finite());
    }

    #[test]
    fn standard_rows_have_zero_mean_unit_variance() {
        let mut rng = RngHandle::new(5);
        let x = RealMatrix::from_fn(7, 40, |_, _| 3.0 + 2.0 * rng.normal());
        let b = bn_standard(&x);
        for row in b.row_iter() {
            let mean = row.iter().sum::<f64>() / 40.0;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }
}
