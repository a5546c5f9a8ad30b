//! Mini-batch training loop with seeded shuffling, validation-based model
//! selection, early stopping, and optional layer freezing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::param_ranges;
use super::model::ModelParams;
use super::optim::{Optimizer, OptimizerKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::exec::ExecMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of samples held out to pick the best epoch; 0 disables
    /// validation and the lowest training loss wins instead.
    pub validation_fraction: f64,
    /// Stop after this many epochs without improvement.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::default(),
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            validation_fraction: 0.1,
            early_stop_patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "learning rate must be positive".into(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig {
                reason: "epochs must be at least 1".into(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig {
                reason: "batch size must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig {
                reason: "validation fraction must lie in [0, 1)".into(),
            });
        }
        Ok(())
    }
}

/// A labelled dataset: inputs stacked along the batch dimension.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub inputs: Tensor,
    pub targets: Vec<f64>,
}

impl TrainSet {
    pub fn new(inputs: Tensor, targets: Vec<f64>) -> Result<TrainSet> {
        if inputs.batch_size() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.batch_size(),
                got: targets.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "training set is empty".into(),
            });
        }
        Ok(TrainSet { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Model at the best monitored epoch, with loss history in its metadata.
    pub model: ModelParams,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// Train every layer.
pub fn train(model: &ModelParams, data: &TrainSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_layers(model, data, cfg, None)
}

/// Train with an optional trainable-layer whitelist; all other layers keep
/// their weights bit-exactly (their gradient entries are zeroed before the
/// optimizer sees them).
pub fn train_layers(
    model: &ModelParams,
    data: &TrainSet,
    cfg: &TrainConfig,
    trainable_layers: Option<&[usize]>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mode = ExecMode::default();
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_val = (cfg.validation_fraction * n as f64).round() as usize;
    let (val_idx, train_idx) = indices.split_at(n_val.min(n.saturating_sub(1)));
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    if train_idx.is_empty() {
        return Err(Error::InvalidConfig {
            reason: "no training samples left after the validation split".into(),
        });
    }

    let mask = trainable_layers.map(|layers| {
        let ranges = param_ranges(&model.arch);
        let mut keep = vec![false; model.weights.len()];
        for &l in layers {
            for k in ranges[l].clone() {
                keep[k] = true;
            }
        }
        keep
    });

    let val_inputs = data.inputs.gather_rows(&val_idx);
    let val_targets: Vec<f64> = val_idx.iter().map(|&i| data.targets[i]).collect();

    let mut current = model.clone();
    let mut optimizer = Optimizer::new(cfg.optimizer, current.weights.len());
    let mut train_loss_hist = Vec::with_capacity(cfg.epochs);
    let mut val_loss_hist = Vec::with_capacity(cfg.epochs);
    let mut best_weights = current.weights.clone();
    let mut best_monitor = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch_rows in train_idx.chunks(cfg.batch_size) {
            let batch = data.inputs.gather_rows(batch_rows);
            let targets: Vec<f64> = batch_rows.iter().map(|&i| data.targets[i]).collect();
            let (loss, mut grad) = current
                .loss_and_grad(&batch, &targets, mode)
                .map_err(|e| promote_divergence(e, epoch))?;
            if let Some(keep) = &mask {
                for (g, &k) in grad.iter_mut().zip(keep) {
                    if !k {
                        *g = 0.0;
                    }
                }
            }
            optimizer.step(&mut current.weights, &grad, cfg.learning_rate);
            epoch_loss += loss * batch_rows.len() as f64;
            seen += batch_rows.len();
        }
        let train_loss = epoch_loss / seen as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        train_loss_hist.push(train_loss);

        let monitor = if val_idx.is_empty() {
            train_loss
        } else {
            let vl = current
                .loss(&val_inputs, &val_targets, mode)
                .map_err(|e| promote_divergence(e, epoch))?;
            val_loss_hist.push(vl);
            vl
        };
        if monitor < best_monitor {
            best_monitor = monitor;
            best_weights.copy_from_slice(&current.weights);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if let Some(patience) = cfg.early_stop_patience {
                if since_best >= patience {
                    break;
                }
            }
        }
    }

    current.weights = best_weights;
    current.meta.seed = cfg.seed;
    current.meta.epochs_trained = train_loss_hist.len();
    current.meta.train_loss = train_loss_hist.clone();
    current.meta.val_loss = val_loss_hist.clone();
    Ok(TrainOutcome {
        model: current,
        train_loss: train_loss_hist,
        val_loss: val_loss_hist,
        best_epoch,
    })
}

fn promote_divergence(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { epoch },
        other => other,
    }
}
