//! Minibatch SGD on a labelled dataset with per-epoch orthogonality and
//! gradient tracking.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bnlab_core::databatch::Batch;
use bnlab_core::netfwd::{forward, NetworkConfig, Weights};
use bnlab_core::netgrad::{backward, sgd_step, Gradients, LossKind};
use bnlab_core::par::{try_map_indexed, Exec};
use bnlab_core::specmat::{isometry_gap, split_seed, RngHandle};

use crate::output::{write_file, Check};
use crate::series::{emit_plot_data, Series, SeriesPoint};
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub lr: f64,
    pub epochs: usize,
    pub loss: LossKind,
}

/// State after one epoch; epoch 0 is the initialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    /// Training accuracy with batch statistics, in `[0, 1]`.
    pub accuracy: f64,
    /// Mean training loss.
    pub loss: f64,
    /// Isometry gap of every hidden weight.
    pub weight_gaps: Vec<f64>,
    /// Frobenius norm of every hidden-weight gradient on the probe batch.
    pub grad_norms: Vec<f64>,
}

/// Accuracy and mean loss over consecutive full batches of `data`.
fn evaluate(config: &NetworkConfig, weights: &Weights, data: &Batch, loss: LossKind) -> Result<(f64, f64)> {
    let n = config.batch;
    let batches = data.len() / n;
    let (mut correct, mut total_loss) = (0usize, 0.0);
    for b in 0..batches {
        let idx: Vec<usize> = (b * n..(b + 1) * n).collect();
        let batch = data.select(&idx);
        let tape = forward(config, &batch.data, weights)?;
        let (l, _) = bnlab_core::netgrad::loss_and_logit_grad(&tape.logits, &batch.labels, loss)?;
        total_loss += l;
        for (j, &y) in batch.labels.iter().enumerate() {
            let col = tape.logits.column(j);
            let pred = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap_or(0);
            correct += usize::from(pred == y);
        }
    }
    Ok((correct as f64 / (batches * n) as f64, total_loss / batches as f64))
}

fn probe_gradients(config: &NetworkConfig, weights: &Weights, probe: &Batch, loss: LossKind) -> Result<Gradients> {
    let tape = forward(config, &probe.data, weights)?;
    Ok(backward(&tape, weights, &probe.labels, loss)?)
}

fn record(
    epoch: usize,
    config: &NetworkConfig,
    weights: &Weights,
    data: &Batch,
    probe: &Batch,
    s: &TrainSettings,
) -> Result<TrainRecord> {
    let (accuracy, loss) = evaluate(config, weights, data, s.loss)?;
    let grads = probe_gradients(config, weights, probe, s.loss)?;
    Ok(TrainRecord {
        epoch,
        accuracy,
        loss,
        weight_gaps: weights.layers.iter().map(isometry_gap).collect(),
        grad_norms: grads.layer_norms(),
    })
}

fn non_finite_report(weights: &Weights, grads: &Gradients) -> String {
    let bad_grad = grads.layers.iter().position(|g| !g.is_finite()).map(|l| l + 1);
    let bad_weight = weights.layers.iter().position(|w| !w.is_finite()).map(|l| l + 1);
    let norms: Vec<String> = grads.layers.iter().take(5).map(|g| format!("{:.3e}", g.frobenius_norm())).collect();
    format!(
        "loss {}; first non-finite gradient at layer {bad_grad:?}; first non-finite weight at layer {bad_weight:?}; \
         leading gradient norms [{}]",
        grads.loss,
        norms.join(", ")
    )
}

/// Trains from the weights of `config.seed`. Each epoch visits the data in
/// a fresh permutation (stream `epoch` of `split_seed(config.seed, 1)`) and
/// drops the last partial batch. The first batch of the dataset is the
/// gradient probe.
pub fn train(config: &NetworkConfig, data: &Batch, settings: &TrainSettings) -> Result<Vec<TrainRecord>> {
    let n = config.batch;
    if data.len() < n {
        bail!("dataset has {} samples, fewer than the batch size {n}", data.len());
    }
    if data.num_classes() > config.classes {
        bail!("dataset has {} classes but the network only {}", data.num_classes(), config.classes);
    }
    let mut weights = Weights::init(config, data.features())?;
    let probe = data.head(n);
    let order_rng = RngHandle::new(split_seed(config.seed, 1));
    let mut records = vec![record(0, config, &weights, data, &probe, settings)?];

    for epoch in 1..=settings.epochs {
        let mut rng = order_rng.child(epoch as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        rng.shuffle(&mut order);
        for (step, idx) in order.chunks_exact(n).enumerate() {
            let batch = data.select(idx);
            let tape = forward(config, &batch.data, &weights)
                .with_context(|| format!("forward pass failed in epoch {epoch}, step {step}"))?;
            let grads = backward(&tape, &weights, &batch.labels, settings.loss)?;
            if !grads.is_finite() {
                bail!("non-finite values in epoch {epoch}, step {step}: {}", non_finite_report(&weights, &grads));
            }
            sgd_step(&mut weights, &grads, settings.lr)?;
        }
        let rec = record(epoch, config, &weights, data, &probe, settings)?;
        if !rec.loss.is_finite() {
            bail!("training loss became {} after epoch {epoch}", rec.loss);
        }
        records.push(rec);
    }
    Ok(records)
}

/// Training curves of one network of the depth axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub depth: usize,
    pub config: NetworkConfig,
    pub records: Vec<TrainRecord>,
}

impl TrainingRun {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.accuracy)
    }

    /// Largest ratio of any layer's gradient norm to its value at
    /// initialisation, over all epochs.
    pub fn max_grad_growth(&self) -> f64 {
        let init = &self.records[0].grad_norms;
        self.records.iter().flat_map(|r| r.grad_norms.iter().zip(init).map(|(g, g0)| g / g0)).fold(0.0, f64::max)
    }

    /// Largest isometry gap of the middle hidden weight over all epochs.
    pub fn max_mid_gap(&self) -> f64 {
        let mid = self.depth / 2;
        self.records.iter().map(|r| r.weight_gaps[mid]).fold(0.0, f64::max)
    }
}

/// Trains the spec's network at every depth of the depth axis on the first
/// `spec.train_samples` samples of `data`.
pub fn run_training(spec: &ExperimentSpec, data: &Batch, loss: LossKind, exec: Exec) -> Result<Vec<TrainingRun>> {
    let data = data.head(spec.train_samples);
    let settings = TrainSettings { lr: spec.lr, epochs: spec.epochs, loss };
    try_map_indexed(exec, spec.depths.len(), |i| {
        let depth = spec.depths[i];
        let config = NetworkConfig { depth, ..spec.network.clone() };
        let records = train(&config, &data, &settings).with_context(|| format!("training depth {depth}"))?;
        Ok(TrainingRun { depth, config, records })
    })
}

/// Accuracy in `[0, 1]`, finite losses and finite gradient norms.
pub fn training_checks(runs: &[TrainingRun]) -> Vec<Check> {
    runs.iter()
        .map(|run| {
            let ok = run.records.iter().all(|r| {
                (0.0..=1.0).contains(&r.accuracy) && r.loss.is_finite() && r.grad_norms.iter().all(|g| g.is_finite())
            });
            Check::new(
                format!("depth {} well formed", run.depth),
                ok,
                format!("final accuracy {:.4}, max gradient growth {:.3}", run.final_accuracy(), run.max_grad_growth()),
            )
        })
        .collect()
}

pub fn write_training_outputs(spec: &ExperimentSpec, runs: &[TrainingRun]) -> Result<()> {
    for run in runs {
        let mut curve = String::from("epoch,accuracy,loss,grad_norm_first,grad_norm_max,weight_gap_mid\n");
        let mut layers = String::from("epoch,layer,weight_gap,grad_norm\n");
        let mid = run.depth / 2;
        for r in &run.records {
            let _ = writeln!(
                curve,
                "{},{:.6},{:e},{:e},{:e},{:e}",
                r.epoch,
                r.accuracy,
                r.loss,
                r.grad_norms[0],
                r.grad_norms.iter().copied().fold(0.0, f64::max),
                r.weight_gaps[mid]
            );
            for (l, (gap, g)) in r.weight_gaps.iter().zip(&r.grad_norms).enumerate() {
                let _ = writeln!(layers, "{},{},{:e},{:e}", r.epoch, l + 1, gap, g);
            }
        }
        write_file(&spec.out_dir, &format!("train_L{}.csv", run.depth), &curve)?;
        write_file(&spec.out_dir, &format!("layers_L{}.csv", run.depth), &layers)?;
        let acc = Series {
            name: format!("accuracy_L{}", run.depth),
            points: run
                .records
                .iter()
                .map(|r| SeriesPoint { x: r.epoch as f64, mean: r.accuracy, stderr: 0.0, count: 1 })
                .collect(),
        };
        emit_plot_data(&acc, &spec.out_dir.join(format!("accuracy_L{}.dat", run.depth)))?;
    }
    Ok(())
}
