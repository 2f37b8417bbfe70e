//! Exact reverse pass through a recorded forward tape.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::jacobian::{bn_jacobian_apply_with_norms, bn_standard_vjp, opnorm_from_scales};
use super::loss::{loss_and_logit_grad, LossKind};
use crate::error::{Error, Result};
use crate::netfwd::{BnVariant, LayerTape, Weights};
use crate::specmat::{isometry_gap, RealMatrix};

/// Gradients of the mean batch loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    /// `dL/dW_l`, same shapes as the hidden weights.
    pub layers: Vec<RealMatrix>,
    pub classifier: RealMatrix,
}

impl Gradients {
    /// Frobenius norm of every hidden-layer gradient.
    pub fn layer_norms(&self) -> Vec<f64> {
        self.layers.iter().map(RealMatrix::frobenius_norm).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.loss.is_finite() && self.classifier.is_finite() && self.layers.iter().all(RealMatrix::is_finite)
    }
}

/// Backpropagates `loss` from the logits down to every hidden weight.
pub fn backward(tape: &LayerTape, weights: &Weights, labels: &[usize], loss: LossKind) -> Result<Gradients> {
    if weights.depth() != tape.depth() {
        return Err(Error::Shape(format!("tape has {} layers, weights {}", tape.depth(), weights.depth())));
    }
    let (loss_value, g_logits) = loss_and_logit_grad(&tape.logits, labels, loss)?;
    let classifier = g_logits.matmul_t(&tape.output);
    let mut dx = weights.classifier.t_matmul(&g_logits);
    let mut layers = vec![RealMatrix::zeros(0, 0); tape.depth()];

    for l in (0..tape.depth()).rev() {
        let rec = &tape.layers[l];
        let db = if tape.activation.is_identity() {
            dx
        } else {
            let b = tape.post_bn(l);
            let (act, alpha) = (tape.activation, rec.alpha);
            let mut db = dx;
            for (g, &v) in db.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *g *= act.derivative(v, alpha);
            }
            db
        };
        let dh = match tape.bn {
            BnVariant::Simplified => bn_jacobian_apply_with_norms(&rec.pre_norm, &rec.row_scales, &db),
            BnVariant::Standard => bn_standard_vjp(tape.post_bn(l), &rec.row_scales, &db),
        }
        .map_err(|e| e.at_layer(l + 1))?;
        layers[l] = dh.matmul_t(&rec.input);
        dx = if l > 0 { weights.layers[l].t_matmul(&dh) } else { RealMatrix::zeros(0, 0) };
    }
    Ok(Gradients { loss: loss_value, layers, classifier })
}

/// Per-layer gradient and Jacobian measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTelemetry {
    /// 1-based layer index.
    pub layer: usize,
    pub grad_fro: f64,
    pub log_grad_fro: f64,
    pub bn_jac_opnorm: f64,
    pub iso_gap_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub loss: f64,
    pub layers: Vec<LayerTelemetry>,
}

impl GradientReport {
    pub fn new(tape: &LayerTape, grads: &Gradients) -> Self {
        let layers = tape
            .layers
            .iter()
            .zip(&grads.layers)
            .enumerate()
            .map(|(l, (rec, g))| {
                let fro = g.frobenius_norm();
                LayerTelemetry {
                    layer: l + 1,
                    grad_fro: fro,
                    log_grad_fro: fro.ln(),
                    bn_jac_opnorm: opnorm_from_scales(&rec.row_scales),
                    iso_gap_h: if rec.pre_norm.rows() <= rec.pre_norm.cols() {
                        isometry_gap(&rec.pre_norm)
                    } else {
                        f64::INFINITY
                    },
                }
            })
            .collect();
        Self { loss: grads.loss, layers }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,grad_fro,log_grad_fro,bn_jac_opnorm,iso_gap_H\n");
        for t in &self.layers {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                t.layer, t.grad_fro, t.log_grad_fro, t.bn_jac_opnorm, t.iso_gap_h
            );
        }
        s
    }
}

/// Plain SGD, `W <- W - lr * dL/dW`, applied in place to every weight.
pub fn sgd_step(weights: &mut Weights, grads: &Gradients, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be non-negative, got {lr}")));
    }
    if grads.layers.len() != weights.layers.len() {
        return Err(Error::Shape("gradient and weight depth differ".into()));
    }
    for (w, g) in weights.layers.iter_mut().zip(&grads.layers) {
        w.axpy(-lr, g);
    }
    weights.classifier.axpy(-lr, &grads.classifier);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_scalar_step() {
        let mut w = Weights { layers: vec![RealMatrix::diag(&[1.0])], classifier: RealMatrix::diag(&[1.0]) };
        let g = Gradients { loss: 0.0, layers: vec![RealMatrix::diag(&[2.0])], classifier: RealMatrix::diag(&[0.0]) };
        let before = w.clone();
        sgd_step(&mut w, &g, 0.0).unwrap();
        assert_eq!(w, before);
        sgd_step(&mut w, &g, 0.1).unwrap();
        assert!((w.layers[0][(0, 0)] - 0.8).abs() < 1e-15);
        assert!(sgd_step(&mut w, &g, -1.0).is_err());
    }
}
