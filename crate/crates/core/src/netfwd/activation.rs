use serde::{Deserialize, Serialize};

use crate::specmat::RealMatrix;

/// Odd activations with `sigma(0) = 0` and `sigma'(0) = 1`, plus identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sin,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" | "linear" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            "sin" => Some(Activation::Sin),
            _ => None,
        }
    }

    pub fn is_identity(self) -> bool {
        self == Activation::Identity
    }

    /// `sigma(alpha * x)`. The identity ignores the gain.
    pub fn eval(self, x: f64, alpha: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => (alpha * x).tanh(),
            Activation::Sin => (alpha * x).sin(),
        }
    }

    /// `d/dx sigma(alpha * x)`.
    pub fn derivative(self, x: f64, alpha: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = (alpha * x).tanh();
                alpha * (1.0 - t * t)
            }
            Activation::Sin => alpha * (alpha * x).cos(),
        }
    }
}

/// Elementwise `sigma(alpha * X)`.
pub fn apply_activation(x: &RealMatrix, kind: Activation, alpha: f64) -> RealMatrix {
    debug_assert!(alpha > 0.0);
    match kind {
        Activation::Identity => x.clone(),
        _ => x.map(|v| kind.eval(v, alpha)),
    }
}
