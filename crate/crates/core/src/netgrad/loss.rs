//! Classification losses on softmax outputs and their logit gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `-log p_y`
    CrossEntropySoftmax,
    /// `(1/C) * sum_i (y_i - p_i)^2` with `p = softmax(z)` and one-hot `y`.
    MseOnSoftmax,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Loss of one sample and its gradient with respect to the logits.
pub fn sample_loss_and_grad(z: &[f64], label: usize, kind: LossKind) -> (f64, Vec<f64>) {
    let p = softmax(z);
    match kind {
        LossKind::CrossEntropySoftmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            let mut grad = p;
            grad[label] -= 1.0;
            (log_sum - z[label], grad)
        }
        LossKind::MseOnSoftmax => {
            let c = z.len() as f64;
            let y = |i: usize| if i == label { 1.0 } else { 0.0 };
            let loss = p.iter().enumerate().map(|(i, pi)| (y(i) - pi).powi(2)).sum::<f64>() / c;
            // d/dz_k = sum_i r_i p_i (delta_ik - p_k), r_i = 2 (p_i - y_i) / C
            let r: Vec<f64> = p.iter().enumerate().map(|(i, pi)| 2.0 * (pi - y(i)) / c).collect();
            let rp: f64 = r.iter().zip(&p).map(|(a, b)| a * b).sum();
            let grad = p.iter().zip(&r).map(|(pk, rk)| pk * (rk - rp)).collect();
            (loss, grad)
        }
    }
}

/// Mean loss over the batch and its gradient with respect to the `C x n`
/// logits. Column `j` of the gradient is the per-sample gradient divided
/// by `n`.
pub fn loss_and_logit_grad(logits: &RealMatrix, labels: &[usize], kind: LossKind) -> Result<(f64, RealMatrix)> {
    let (c, n) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} logit columns but {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
    }
    let mut grad = RealMatrix::zeros(c, n);
    let mut total = 0.0;
    for (j, &y) in labels.iter().enumerate() {
        let (loss, g) = sample_loss_and_grad(&logits.column(j), y, kind);
        total += loss;
        for (i, gi) in g.into_iter().enumerate() {
            grad[(i, j)] = gi / n as f64;
        }
    }
    Ok((total / n as f64, grad))
}
