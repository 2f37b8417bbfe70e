//! Network description and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

/// Per-layer gain `alpha_l`, with layers counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainSchedule {
    Constant {
        alpha: f64,
    },
    /// `alpha_l = l^(-exponent)`
    PowerLaw {
        exponent: f64,
    },
}

impl GainSchedule {
    pub fn alpha(&self, layer: usize) -> f64 {
        debug_assert!(layer >= 1, "layers are counted from 1");
        match *self {
            GainSchedule::Constant { alpha } => alpha,
            GainSchedule::PowerLaw { exponent } => (layer as f64).powf(-exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GainSchedule::Constant { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("gain_alpha must be positive, got {alpha}")))
            }
            GainSchedule::PowerLaw { exponent } if !exponent.is_finite() => {
                Err(Error::Config(format!("gain_exponent must be finite, got {exponent}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule::Constant { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightInit {
    HaarOrthogonal,
    Gaussian { variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnVariant {
    /// Row normalisation without centring or epsilon.
    Simplified,
    /// Centring and `1/sqrt(var + eps)` scaling.
    Standard,
}

impl BnVariant {
    pub fn name(self) -> &'static str {
        match self {
            BnVariant::Simplified => "simplified",
            BnVariant::Standard => "standard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub width: usize,
    pub batch: usize,
    pub depth: usize,
    pub weight_init: WeightInit,
    pub activation: Activation,
    pub gain: GainSchedule,
    pub bn: BnVariant,
    pub classes: usize,
    pub seed: u64,
}

impl NetworkConfig {
    /// Linear network with Haar weights, simplified BN and a square batch.
    pub fn linear(width: usize, depth: usize, seed: u64) -> Self {
        Self {
            width,
            batch: width,
            depth,
            weight_init: WeightInit::HaarOrthogonal,
            activation: Activation::Identity,
            gain: GainSchedule::default(),
            bn: BnVariant::Simplified,
            classes: 10.min(width),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::Config(format!("width must be at least 2, got {}", self.width)));
        }
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.batch < 1 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if self.classes < 1 || self.classes > self.width {
            return Err(Error::Config(format!("classes must lie in 1..={}, got {}", self.width, self.classes)));
        }
        if let WeightInit::Gaussian { variance } = self.weight_init {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::Config(format!("variance must be positive, got {variance}")));
            }
        }
        self.gain.validate()
    }

    /// Serialises to the `key = value` format read by [`NetworkConfig::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "depth = {}", self.depth);
        match self.weight_init {
            WeightInit::HaarOrthogonal => {
                let _ = writeln!(s, "init = haar");
            }
            WeightInit::Gaussian { variance } => {
                let _ = writeln!(s, "init = gaussian");
                let _ = writeln!(s, "variance = {variance:?}");
            }
        }
        let _ = writeln!(s, "activation = {}", self.activation.name());
        match self.gain {
            GainSchedule::Constant { alpha } => {
                let _ = writeln!(s, "gain_kind = constant");
                let _ = writeln!(s, "gain_alpha = {alpha:?}");
            }
            GainSchedule::PowerLaw { exponent } => {
                let _ = writeln!(s, "gain_kind = power_law");
                let _ = writeln!(s, "gain_exponent = {exponent:?}");
            }
        }
        let _ = writeln!(s, "bn = {}", self.bn.name());
        let _ = writeln!(s, "classes = {}", self.classes);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped,
    /// unknown keys are rejected. Missing keys take the defaults of
    /// [`NetworkConfig::linear`] with width 32 and depth 50.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = NetworkConfig::linear(32, 50, 0);
        let mut batch_set = false;
        let mut classes_set = false;
        let (mut init, mut variance) = (None::<String>, None::<f64>);
        let (mut gain_kind, mut gain_alpha, mut gain_exponent) = (None::<String>, None::<f64>, None::<f64>);

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) =
                line.split_once('=').ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = || value.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
            let real = || value.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
            match key {
                "width" => cfg.width = int()?,
                "batch" => {
                    cfg.batch = int()?;
                    batch_set = true;
                }
                "depth" => cfg.depth = int()?,
                "init" => init = Some(value.to_string()),
                "variance" => variance = Some(real()?),
                "activation" => {
                    cfg.activation =
                        Activation::parse(value).ok_or_else(|| bad(format!("unknown activation {value:?}")))?
                }
                "gain_kind" => gain_kind = Some(value.to_string()),
                "gain_alpha" => gain_alpha = Some(real()?),
                "gain_exponent" => gain_exponent = Some(real()?),
                "bn" => {
                    cfg.bn = match value {
                        "simplified" => BnVariant::Simplified,
                        "standard" => BnVariant::Standard,
                        _ => return Err(bad(format!("unknown bn variant {value:?}"))),
                    }
                }
                "classes" => {
                    cfg.classes = int()?;
                    classes_set = true;
                }
                "seed" => cfg.seed = value.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?,
                _ => return Err(bad(format!("unknown key {key:?}"))),
            }
        }

        if !batch_set {
            cfg.batch = cfg.width;
        }
        if !classes_set {
            cfg.classes = 10.min(cfg.width);
        }
        cfg.weight_init = match init.as_deref() {
            None | Some("haar") | Some("haar_orthogonal") | Some("orthogonal") => WeightInit::HaarOrthogonal,
            Some("gaussian") => WeightInit::Gaussian { variance: variance.unwrap_or(1.0 / cfg.width as f64) },
            Some(other) => return Err(Error::Config(format!("unknown init {other:?}"))),
        };
        cfg.gain = match gain_kind.as_deref() {
            None | Some("constant") => GainSchedule::Constant { alpha: gain_alpha.unwrap_or(1.0) },
            Some("power_law") => GainSchedule::PowerLaw {
                exponent: gain_exponent.ok_or_else(|| Error::Config("power_law gain needs gain_exponent".into()))?,
            },
            Some(other) => return Err(Error::Config(format!("unknown gain_kind {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string())?;
        Ok(())
    }
}
