//! Batch-normalised MLP: normalisation operators, activations, configuration
//! and the recorded forward pass.

mod activation;
mod bn;
mod config;
mod forward;

pub use activation::{apply_activation, Activation};
pub use bn::{bn_simplified, bn_simplified_with_norms, bn_standard, bn_standard_with_scales, STANDARD_BN_EPS};
pub use config::{BnVariant, GainSchedule, NetworkConfig, WeightInit};
pub use forward::{forward, layer_forward, layer_weight, LayerRecord, LayerTape, Weights};
