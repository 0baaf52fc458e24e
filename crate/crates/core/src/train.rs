//! Minibatch SGD with validation early stopping for the neural fusion
//! models, plus a finite-difference gradient checker.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::filter::{quantize_mos, DEFAULT_MOS_STEP};
use crate::fusion::{
    fused_mos, Differentiable, FeatureSet, FusionModel, GateInput, GatedMlpParams, HiddenSize,
    MlpParams, MosFuserParams, Sample,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new validation-loss minimum before stopping.
    pub patience: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 1,
            max_epochs: 1000,
            patience: 20,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "patience, batch size and max epochs must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "valid_loss"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.valid_loss.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Mean per-sample loss.
pub fn mean_loss<M: Differentiable>(model: &M, samples: &[Sample]) -> f64 {
    samples.iter().map(|s| model.loss(s)).sum::<f64>() / samples.len() as f64
}

/// Trains a network by minibatch SGD.
///
/// Each epoch reshuffles (seeded), steps `p <- p - lr * mean batch gradient`,
/// then evaluates the full training and validation losses. Training stops
/// after `patience` epochs without a strictly lower validation loss, or at
/// `max_epochs`; the parameters of the best epoch are returned.
pub fn train_network<M: Differentiable>(
    init: M,
    train: &[Sample],
    valid: &[Sample],
    cfg: &TrainConfig,
) -> Result<(M, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidConfig(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for s in train.iter().chain(valid) {
        init.check_sample(s)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut model = init;
    let mut flat = model.flat_params();
    let mut grad = vec![0.0; flat.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };
    let mut best_loss = f64::INFINITY;
    let mut best_model = model.clone();

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                model.loss_and_grad(&train[i], &mut grad);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (p, g) in flat.iter_mut().zip(&grad) {
                *p -= step * g;
            }
            model.set_flat_params(&flat);
        }

        let train_loss = mean_loss(&model, train);
        let valid_loss = mean_loss(&model, valid);
        if !train_loss.is_finite() || !valid_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss diverged at epoch {epoch} (train {train_loss}, valid {valid_loss})"
            )));
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            valid_loss,
        });
        history.stopped_epoch = epoch;
        if valid_loss < best_loss {
            best_loss = valid_loss;
            history.best_epoch = epoch;
            best_model = model.clone();
        } else if epoch - history.best_epoch >= cfg.patience {
            break;
        }
    }
    Ok((best_model, history))
}

/// Which neural fusion model to train, and how records become samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Mlp {
        features: FeatureSet,
        hidden: HiddenSize,
    },
    GatedMlp {
        gate_input: GateInput,
        hidden: HiddenSize,
    },
    /// Regresses `mos_fused` from the MOS vector, optionally on the
    /// 0.125-step quantization grid.
    MosFuser { quantize_targets: bool },
}

impl ModelSpec {
    pub fn samples(&self, ds: &Dataset) -> Result<Vec<Sample>> {
        match self {
            ModelSpec::Mlp { features, .. } => {
                let targets = ds.targets()?;
                ds.iter()
                    .zip(targets)
                    .map(|(r, t)| Ok(Sample::new(features.extract(r)?, t)))
                    .collect()
            }
            ModelSpec::GatedMlp { gate_input, .. } => {
                let targets = ds.targets()?;
                ds.iter()
                    .zip(targets)
                    .map(|(r, t)| Ok(Sample::gated(r.fad.clone(), gate_input.extract(r)?, t)))
                    .collect()
            }
            ModelSpec::MosFuser { quantize_targets } => ds
                .iter()
                .map(|r| {
                    let mut z = fused_mos(r)?;
                    if *quantize_targets {
                        z = quantize_mos(z.clamp(1.0, 5.0), DEFAULT_MOS_STEP)?;
                    }
                    Ok(Sample::new(r.mos.clone(), z))
                })
                .collect(),
        }
    }

    fn is_classifier(&self) -> bool {
        !matches!(self, ModelSpec::MosFuser { .. })
    }
}

/// Builds, initializes and trains the model described by `spec`.
pub fn train_model(
    spec: &ModelSpec,
    train: &Dataset,
    valid: &Dataset,
    cfg: &TrainConfig,
) -> Result<(FusionModel, TrainHistory)> {
    if train.fad_dim() != valid.fad_dim() || train.mos_dim() != valid.mos_dim() {
        return Err(Error::DimensionMismatch(format!(
            "train is ({}, {}) but valid is ({}, {})",
            train.fad_dim(),
            train.mos_dim(),
            valid.fad_dim(),
            valid.mos_dim()
        )));
    }
    let train_s = spec.samples(train)?;
    let valid_s = spec.samples(valid)?;
    if spec.is_classifier() {
        let pos = train_s.iter().filter(|s| s.target == 1.0).count();
        if pos == 0 || pos == train_s.len() {
            return Err(Error::SingleClass(format!(
                "{pos} bona fide among {} training records",
                train_s.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, m) = (train.fad_dim(), train.mos_dim());
    Ok(match *spec {
        ModelSpec::Mlp { features, hidden } => {
            let in_dim = features.dim(n, m);
            let init = MlpParams::init(in_dim, hidden.resolve(in_dim), &mut rng);
            let (params, h) = train_network(init, &train_s, &valid_s, cfg)?;
            (FusionModel::Mlp { features, params }, h)
        }
        ModelSpec::GatedMlp { gate_input, hidden } => {
            let init = GatedMlpParams::init(n, gate_input.dim(m), hidden.resolve(n), &mut rng);
            let (params, h) = train_network(init, &train_s, &valid_s, cfg)?;
            (FusionModel::GatedMlp { gate_input, params }, h)
        }
        ModelSpec::MosFuser { .. } => {
            if m == 0 {
                return Err(Error::DimensionMismatch("MOS fuser needs MOS inputs".into()));
            }
            let init = MosFuserParams::init(m, &mut rng);
            let (params, h) = train_network(init, &train_s, &valid_s, cfg)?;
            (FusionModel::MosFuser { params }, h)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Max over parameters of `|a - n| / max(|a|, |n|, REL_FLOOR)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// Compares the analytic gradient with central finite differences.
pub fn grad_check<M: Differentiable>(model: &M, sample: &Sample, eps: f64) -> GradCheck {
    let base = model.flat_params();
    let mut analytic = vec![0.0; base.len()];
    model.loss_and_grad(sample, &mut analytic);

    let mut probe = model.clone();
    let mut shifted = base.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    for i in 0..base.len() {
        shifted[i] = base[i] + eps;
        probe.set_flat_params(&shifted);
        let up = probe.loss(sample);
        shifted[i] = base[i] - eps;
        probe.set_flat_params(&shifted);
        let down = probe.loss(sample);
        shifted[i] = base[i];

        let numeric = (up - down) / (2.0 * eps);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        out.max_abs_error = out.max_abs_error.max(abs);
        out.max_rel_error = out.max_rel_error.max(rel);
    }
    out
}
