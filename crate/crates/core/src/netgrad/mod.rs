//! Exact backpropagation through the normalised chain: closed-form BN
//! Jacobians, softmax losses, per-layer telemetry and SGD.

mod backward;
mod jacobian;
mod loss;

pub use backward::{backward, sgd_step, GradientReport, Gradients, LayerTelemetry};
pub use jacobian::{
    bn_jacobian_apply, bn_jacobian_apply_with_norms, bn_jacobian_opnorm, bn_standard_vjp, bn_standard_vjp_row,
    opnorm_from_scales, BnJacobianBlock,
};
pub use loss::{loss_and_logit_grad, sample_loss_and_grad, softmax, LossKind};
