//! Forward pass `X_{l+1} = sigma(alpha_l * BN(W_l X_l))` with a tape for
//! exact backpropagation.

use super::activation::{apply_activation, Activation};
use super::bn::{bn_simplified_with_norms, bn_standard_with_scales};
use super::config::{BnVariant, NetworkConfig, WeightInit};
use crate::error::{Error, Result};
use crate::specmat::{sample_gaussian_rect, sample_haar_orthogonal, sample_orthonormal_rows, RealMatrix, RngHandle};

/// Stream index of the classifier under the weight seed, kept away from the
/// layer indices so every depth shares the same hidden-layer prefix.
const CLASSIFIER_STREAM: u64 = 1 << 40;

/// Hidden weights `W_1..W_L` plus the `C x d` classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub layers: Vec<RealMatrix>,
    pub classifier: RealMatrix,
}

impl Weights {
    /// Samples weights for inputs with `input_dim` features. Layer `l`
    /// (0-based) draws from child stream `l` of `config.seed`, so networks of
    /// different depth agree on their common layers.
    ///
    /// A first layer with `input_dim != width` is `width x input_dim`:
    /// orthonormal rows under Haar init (needs `width <= input_dim`).
    pub fn init(config: &NetworkConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        let layers = (0..config.depth).map(|l| Self::hidden(config, input_dim, l)).collect::<Result<Vec<_>>>()?;
        let classifier = sample_orthonormal_rows(
            config.classes,
            config.width,
            &mut RngHandle::new(config.seed).child(CLASSIFIER_STREAM),
        )?;
        Ok(Self { layers, classifier })
    }

    /// The 0-based hidden weight `l` that [`Weights::init`] would draw, for
    /// streaming through deep networks without holding every layer.
    pub fn hidden(config: &NetworkConfig, input_dim: usize, l: usize) -> Result<RealMatrix> {
        let cols = if l == 0 { input_dim } else { config.width };
        layer_weight(config.weight_init, config.width, cols, &mut RngHandle::new(config.seed).child(l as u64))
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// A single `rows x cols` weight under the given initialisation.
pub fn layer_weight(init: WeightInit, rows: usize, cols: usize, rng: &mut RngHandle) -> Result<RealMatrix> {
    match init {
        WeightInit::HaarOrthogonal if rows == cols => sample_haar_orthogonal(rows, rng),
        WeightInit::HaarOrthogonal => sample_orthonormal_rows(rows, cols, rng),
        WeightInit::Gaussian { variance } => sample_gaussian_rect(rows, cols, variance, rng),
    }
}

/// Cached state of one layer.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    /// `X_l`
    pub input: RealMatrix,
    /// `H_l = W_l X_l`
    pub pre_norm: RealMatrix,
    /// `B_l = BN(H_l)`; `None` when the activation is the identity and
    /// `B_l = X_{l+1}`.
    post_bn: Option<RealMatrix>,
    /// Row norms of `H_l` (simplified BN) or `sqrt(var + eps)` (standard BN).
    pub row_scales: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct LayerTape {
    pub activation: Activation,
    pub bn: BnVariant,
    pub layers: Vec<LayerRecord>,
    /// `X_L`
    pub output: RealMatrix,
    /// Classifier output, `C x n`.
    pub logits: RealMatrix,
}

impl LayerTape {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `X_{l+1}` for 0-based layer `l`.
    pub fn layer_output(&self, l: usize) -> &RealMatrix {
        match self.layers.get(l + 1) {
            Some(next) => &next.input,
            None => &self.output,
        }
    }

    /// `B_l` for 0-based layer `l`.
    pub fn post_bn(&self, l: usize) -> &RealMatrix {
        self.layers[l].post_bn.as_ref().unwrap_or_else(|| self.layer_output(l))
    }

    /// Representations `X_0, ..., X_L`.
    pub fn representations(&self) -> impl Iterator<Item = &RealMatrix> {
        self.layers.iter().map(|r| &r.input).chain(std::iter::once(&self.output))
    }
}

/// Result of one layer: `(B, row scales, X_next)`; `B` is dropped for the
/// identity activation.
struct Step {
    post_bn: Option<RealMatrix>,
    row_scales: Vec<f64>,
    h: RealMatrix,
    next: RealMatrix,
}

fn step(config: &NetworkConfig, w: &RealMatrix, x: &RealMatrix, layer: usize) -> Result<Step> {
    if w.cols() != x.rows() {
        return Err(Error::Shape(format!(
            "layer {}: weight is {:?} but input has {} rows",
            layer + 1,
            w.shape(),
            x.rows()
        )));
    }
    let h = w.matmul(x);
    let (b, row_scales) = match config.bn {
        BnVariant::Simplified => bn_simplified_with_norms(&h).map_err(|e| e.at_layer(layer + 1))?,
        BnVariant::Standard => bn_standard_with_scales(&h),
    };
    let alpha = config.gain.alpha(layer + 1);
    if config.activation.is_identity() {
        Ok(Step { post_bn: None, row_scales, h, next: b })
    } else {
        let next = apply_activation(&b, config.activation, alpha);
        Ok(Step { post_bn: Some(b), row_scales, h, next })
    }
}

/// One layer without recording: `sigma(alpha_l * BN(W X))` for 0-based
/// layer index `layer`.
pub fn layer_forward(config: &NetworkConfig, w: &RealMatrix, x: &RealMatrix, layer: usize) -> Result<RealMatrix> {
    step(config, w, x, layer).map(|s| s.next)
}

/// Runs the whole network and records every intermediate.
pub fn forward(config: &NetworkConfig, x0: &RealMatrix, weights: &Weights) -> Result<LayerTape> {
    if weights.layers.len() != config.depth {
        return Err(Error::Shape(format!("expected {} weights, got {}", config.depth, weights.layers.len())));
    }
    if weights.classifier.cols() != config.width {
        return Err(Error::Shape(format!(
            "classifier is {:?}, expected {} columns",
            weights.classifier.shape(),
            config.width
        )));
    }
    let mut layers = Vec::with_capacity(config.depth);
    let mut x = x0.clone();
    for (l, w) in weights.layers.iter().enumerate() {
        if l > 0 && w.shape() != (config.width, config.width) {
            return Err(Error::Shape(format!("layer {} weight is {:?}", l + 1, w.shape())));
        }
        let Step { post_bn, row_scales, h, next } = step(config, w, &x, l)?;
        let alpha = config.gain.alpha(l + 1);
        layers.push(LayerRecord { input: x, pre_norm: h, post_bn, row_scales, alpha });
        x = next;
    }
    let logits = weights.classifier.matmul(&x);
    Ok(LayerTape { activation: config.activation, bn: config.bn, layers, output: x, logits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfwd::GainSchedule;
    use crate::specmat::isometry_gap;

    #[test]
    fn identity_weights_fix_orthogonal_input() {
        let d = 6;
        let x0 = sample_haar_orthogonal(d, &mut RngHandle::new(1)).unwrap();
        let cfg = NetworkConfig::linear(d, 5, 0);
        let mut w = Weights::init(&cfg, d).unwrap();
        w.layers.iter_mut().for_each(|m| *m = RealMatrix::identity(d));
        let tape = forward(&cfg, &x0, &w).unwrap();
        assert!(tape.output.max_abs_diff(&x0) < 1e-12);
        assert_eq!(tape.post_bn(4), &tape.output);
    }

    #[test]
    fn gap_is_non_increasing_in_linear_haar_network() {
        let d = 16;
        let mut rng = RngHandle::new(3);
        let x0 = RealMatrix::from_fn(d, d, |_, _| rng.normal());
        let cfg = NetworkConfig::linear(d, 30, 8);
        let tape = forward(&cfg, &x0, &Weights::init(&cfg, d).unwrap()).unwrap();
        let gaps: Vec<f64> = tape.representations().map(isometry_gap).collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{gaps:?}");
        }
        assert!(gaps[30] < gaps[0]);
    }

    #[test]
    fn degenerate_row_reports_layer() {
        let cfg = NetworkConfig::linear(3, 2, 0);
        let mut w = Weights::init(&cfg, 3).unwrap();
        w.layers[1] = RealMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0; 3], vec![0.0, 0.0, 1.0]]).unwrap();
        let err = forward(&cfg, &RealMatrix::identity(3), &w).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow { layer: Some(2), row: 1 }), "{err}");
    }

    #[test]
    fn tape_keeps_post_bn_for_nonlinear_activation() {
        let mut cfg = NetworkConfig::linear(4, 3, 2);
        cfg.activation = Activation::Tanh;
        cfg.gain = GainSchedule::Constant { alpha: 0.5 };
        let mut rng = RngHandle::new(9);
        let x0 = RealMatrix::from_fn(4, 4, |_, _| rng.normal());
        let tape = forward(&cfg, &x0, &Weights::init(&cfg, 4).unwrap()).unwrap();
        for l in 0..3 {
            let b = tape.post_bn(l);
            for n in b.row_norms() {
                assert!((n - 1.0).abs() < 1e-9);
            }
            let next = apply_activation(b, Activation::Tanh, 0.5);
            assert!(next.max_abs_diff(tape.layer_output(l)) < 1e-15);
        }
        assert_eq!(tape.logits.shape(), (4, 4));
    }

    #[test]
    fn wide_input_layer() {
        let mut cfg = NetworkConfig::linear(4, 2, 5);
        cfg.batch = 9;
        cfg.bn = BnVariant::Standard;
        let w = Weights::init(&cfg, 20).unwrap();
        assert_eq!(w.layers[0].shape(), (4, 20));
        let mut rng = RngHandle::new(2);
        let x0 = RealMatrix::from_fn(20, 9, |_, _| rng.normal());
        let tape = forward(&cfg, &x0, &w).unwrap();
        assert_eq!(tape.output.shape(), (4, 9));
        assert!(forward(&cfg, &RealMatrix::zeros(5, 9), &w).is_err());
    }
}
