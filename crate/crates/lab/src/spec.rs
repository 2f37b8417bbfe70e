//! Experiment descriptions and their `key = value` configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bnlab_core::databatch::SynthKind;
use bnlab_core::netfwd::{Activation, BnVariant, GainSchedule, NetworkConfig, WeightInit};
use bnlab_core::specmat::RANK_TOL;

use crate::calibration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Isometry,
    Gradients,
    Degenerate,
    Weingarten,
    Shaping,
    RankAudit,
    Train,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Isometry => "isometry",
            ExperimentKind::Gradients => "gradients",
            ExperimentKind::Degenerate => "degenerate",
            ExperimentKind::Weingarten => "weingarten",
            ExperimentKind::Shaping => "shaping",
            ExperimentKind::RankAudit => "rank-audit",
            ExperimentKind::Train => "train",
        }
    }
}

/// Everything needed to regenerate one experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Base network; sweeps override width, depth and gain per point.
    pub network: NetworkConfig,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Repetitions per sweep point.
    pub seeds: usize,
    /// Synthetic input for experiments that do not read a dataset.
    pub input: SynthKind,
    /// IDX directory or CSV file.
    pub dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Scale of the `exp(-l / k)` overlay, `k = c_cal * d^2 * (1 + d * phi_0)`.
    pub c_cal: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Leading samples of the dataset used for training.
    pub train_samples: usize,
    /// Exponent `k > 1` of the predicted per-layer rate `c1 * l^(-k)`.
    pub gain_k: f64,
    /// Layer of the explosion-rate measurement.
    pub rate_layer: usize,
    /// Depth of the networks in the rate sweep.
    pub rate_depth: usize,
    pub mc_samples: usize,
    /// Haar draws per input in the isometry-lift check.
    pub lift_samples: usize,
    pub trials: usize,
    pub rank_tol: RankThreshold,
    pub batch_sizes: Vec<usize>,
}

impl ExperimentSpec {
    /// Desk-scale defaults of each experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut network = NetworkConfig::linear(32, 200, 0);
        let mut spec = ExperimentSpec {
            kind,
            network: network.clone(),
            depths: vec![200],
            widths: vec![32],
            alphas: vec![],
            seeds: 10,
            input: SynthKind::Gaussian,
            dataset: None,
            out_dir: PathBuf::from("out").join(kind.name()),
            c_cal: calibration::frozen_c_cal(),
            lr: 0.001,
            epochs: 30,
            train_samples: 5000,
            gain_k: 2.0,
            rate_layer: 100,
            rate_depth: 200,
            mc_samples: 100_000,
            lift_samples: 2000,
            trials: 100,
            rank_tol: RankThreshold::Relative(RANK_TOL),
            batch_sizes: vec![],
        };
        match kind {
            ExperimentKind::Isometry => {}
            ExperimentKind::Gradients | ExperimentKind::Degenerate => {
                spec.depths = vec![50, 100, 200, 500];
            }
            ExperimentKind::Weingarten => {
                spec.widths = vec![3, 4, 8];
                spec.trials = 50;
            }
            ExperimentKind::Shaping => {
                network = NetworkConfig::linear(100, 200, 0);
                network.activation = Activation::Tanh;
                network.bn = BnVariant::Standard;
                spec.widths = vec![100];
                spec.depths = vec![50, 100, 200, 300];
                spec.alphas = vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.85, 1.0];
                spec.seeds = 3;
            }
            ExperimentKind::RankAudit => {
                spec.batch_sizes = vec![16, 32, 64, 128, 256, 512];
            }
            ExperimentKind::Train => {
                network = NetworkConfig::linear(100, 10, 0);
                network.bn = BnVariant::Standard;
                spec.widths = vec![100];
                spec.depths = vec![10, 50, 100];
            }
        }
        if kind != ExperimentKind::Isometry && kind != ExperimentKind::Gradients && kind != ExperimentKind::Degenerate {
            spec.network = network;
        }
        spec
    }

    /// Wide and deep settings for the isometry and gradient sweeps.
    pub fn full_scale(mut self) -> Self {
        match self.kind {
            ExperimentKind::Isometry => {
                self.widths = vec![100];
                self.depths = vec![1000];
            }
            ExperimentKind::Gradients | ExperimentKind::Degenerate => {
                self.widths = vec![100];
                self.depths = vec![100, 200, 500, 1000];
            }
            ExperimentKind::Shaping => {
                self.depths = vec![100, 200, 500, 1000];
                self.seeds = 10;
            }
            _ => {}
        }
        self
    }

    /// Applies a configuration file. Experiment keys are handled here, all
    /// other keys go to the network description.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        let mut network_lines: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("line {}: bad value for {key}", lineno + 1);
            match key {
                "depths" => self.depths = parse_list(value).with_context(ctx)?,
                "widths" => self.widths = parse_list(value).with_context(ctx)?,
                "alphas" => self.alphas = parse_list(value).with_context(ctx)?,
                "batch_sizes" => self.batch_sizes = parse_list(value).with_context(ctx)?,
                "seeds" => self.seeds = value.parse().with_context(ctx)?,
                "dataset" => self.dataset = Some(PathBuf::from(value)),
                "input" => self.input = parse_input(value).with_context(ctx)?,
                "c_cal" => self.c_cal = value.parse().with_context(ctx)?,
                "lr" => self.lr = value.parse().with_context(ctx)?,
                "epochs" => self.epochs = value.parse().with_context(ctx)?,
                "train_samples" => self.train_samples = value.parse().with_context(ctx)?,
                "gain_k" => self.gain_k = value.parse().with_context(ctx)?,
                "rate_layer" => self.rate_layer = value.parse().with_context(ctx)?,
                "rate_depth" => self.rate_depth = value.parse().with_context(ctx)?,
                "lift_samples" => self.lift_samples = value.parse().with_context(ctx)?,
                "mc_samples" => self.mc_samples = value.parse().with_context(ctx)?,
                "trials" => self.trials = value.parse().with_context(ctx)?,
                "rank_tol" => self.rank_tol = RankThreshold::parse(value).with_context(ctx)?,
                _ => network_lines.push((key.to_string(), value.to_string())),
            }
        }
        if network_lines.is_empty() {
            return Ok(());
        }
        let given = |k: &str| network_lines.iter().any(|(key, _)| key == k);
        // Keys derived from the width or init fall back to their defaults
        // unless set explicitly alongside.
        let mut dropped: Vec<&str> = Vec::new();
        if given("width") {
            dropped.extend(["batch", "classes", "variance"]);
        }
        if given("init") {
            dropped.push("variance");
        }
        let base = self.network.to_kv_string();
        let mut merged: String = base
            .lines()
            .filter(|l| {
                let key = l.split('=').next().unwrap_or("").trim();
                !dropped.contains(&key)
            })
            .map(|l| format!("{l}\n"))
            .collect();
        for (k, v) in &network_lines {
            merged.push_str(&format!("{k} = {v}\n"));
        }
        self.network = NetworkConfig::from_kv_str(&merged)?;
        Ok(())
    }

    pub fn load(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let mut spec = Self::defaults(kind);
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        spec.apply_kv(&text)?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let needs = |name: &str, empty: bool| -> Result<()> {
            if empty {
                bail!("sweep axis {name} is empty");
            }
            Ok(())
        };
        needs("depths", self.depths.is_empty())?;
        needs("widths", self.widths.is_empty())?;
        if self.seeds == 0 {
            bail!("seeds must be positive");
        }
        match self.kind {
            ExperimentKind::Shaping => needs("alphas", self.alphas.is_empty())?,
            ExperimentKind::RankAudit => needs("batch_sizes", self.batch_sizes.is_empty())?,
            ExperimentKind::Gradients | ExperimentKind::Degenerate if self.depths.len() < 4 => {
                bail!("gradient sweeps need at least 4 depths, got {}", self.depths.len())
            }
            _ => {}
        }
        if self.kind == ExperimentKind::Shaping && self.rate_layer > self.rate_depth {
            bail!("rate_layer {} exceeds rate_depth {}", self.rate_layer, self.rate_depth);
        }
        Ok(())
    }

    /// Creates the output directory and checks that it is writable.
    pub fn prepare_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        let probe = self.out_dir.join(".write-test");
        std::fs::write(&probe, b"").with_context(|| format!("{} is not writable", self.out_dir.display()))?;
        std::fs::remove_file(probe)?;
        Ok(())
    }

    /// Network of this spec at the given width and depth, with batch equal to
    /// the width.
    pub fn network_at(&self, width: usize, depth: usize) -> NetworkConfig {
        let mut cfg = self.network.clone();
        if let WeightInit::Gaussian { variance } = cfg.weight_init {
            if (variance * cfg.width as f64 - 1.0).abs() < 1e-12 {
                cfg.weight_init = WeightInit::Gaussian { variance: 1.0 / width as f64 };
            }
        }
        cfg.width = width;
        cfg.batch = width;
        cfg.depth = depth;
        cfg.classes = cfg.classes.min(width);
        cfg
    }

    pub fn with_gain(&self, cfg: &NetworkConfig, gain: GainSchedule) -> NetworkConfig {
        NetworkConfig { gain, ..cfg.clone() }
    }
}

/// Singular-value threshold of the rank audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankThreshold {
    /// Fixed fraction of the top singular value.
    Relative(f64),
    /// Default rank threshold of a single-precision `n x n` Gram matrix,
    /// `n * eps_f32 * lambda_max`, expressed on singular values of the batch.
    GramF32,
}

impl RankThreshold {
    pub fn parse(value: &str) -> Result<Self> {
        match value {
            "gram_f32" => Ok(RankThreshold::GramF32),
            v => Ok(RankThreshold::Relative(v.parse()?)),
        }
    }

    /// Relative threshold on singular values for a batch of `n` samples.
    pub fn relative(self, n: usize) -> f64 {
        match self {
            RankThreshold::Relative(t) => t,
            RankThreshold::GramF32 => (n as f64 * f32::EPSILON as f64).sqrt(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.split(',').map(|v| v.trim()).filter(|v| !v.is_empty()).map(|v| Ok(v.parse::<T>()?)).collect()
}

/// `gaussian`, `orthogonal_cols` or `duplicated:<samples>x<copies>`.
pub fn parse_input(value: &str) -> Result<SynthKind> {
    match value {
        "gaussian" => Ok(SynthKind::Gaussian),
        "orthogonal_cols" | "orthogonal" => Ok(SynthKind::OrthogonalCols),
        other => {
            let Some(rest) = other.strip_prefix("duplicated") else { bail!("unknown input {other:?}") };
            let rest = rest.trim_start_matches([':', '_']);
            if rest.is_empty() {
                return Ok(SynthKind::Duplicated { samples: 1, copies: 2 });
            }
            let (s, c) = rest.split_once('x').context("expected duplicated:<samples>x<copies>")?;
            Ok(SynthKind::Duplicated { samples: s.parse()?, copies: c.parse()? })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_overrides() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Gradients);
        spec.apply_kv("depths = 10, 20,30,40\nseeds = 3\ninit = gaussian\nwidth = 8\ninput = duplicated:2x3\n")
            .unwrap();
        assert_eq!(spec.depths, vec![10, 20, 30, 40]);
        assert_eq!(spec.seeds, 3);
        assert_eq!(spec.network.width, 8);
        assert_eq!(spec.network.weight_init, WeightInit::Gaussian { variance: 0.125 });
        assert_eq!(spec.input, SynthKind::Duplicated { samples: 2, copies: 3 });
        spec.validate().unwrap();
    }

    #[test]
    fn empty_axes_are_rejected() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Gradients);
        spec.apply_kv("depths = 10,20").unwrap();
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::defaults(ExperimentKind::Isometry);
        spec.widths.clear();
        assert!(spec.validate().is_err());
        assert!(ExperimentSpec::defaults(ExperimentKind::Shaping).validate().is_ok());
        assert!(spec.apply_kv("nonsense = 1").is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ExperimentSpec::defaults(ExperimentKind::Shaping);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&json).unwrap(), spec);
    }
}
