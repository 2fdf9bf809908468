use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ArchitectureKind, Dataset, HyperParams, Network};
use crate::cohort::{Schema, StandardizationStats, WindowConfig, WindowGrid};
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, Adam, Parameters, Tensor};
use crate::rng::substream;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 200,
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean regularized loss over the epoch's minibatches.
    pub train_loss: f64,
    /// Plain cross-entropy on the validation set, dropout off.
    pub val_loss: f64,
}

/// How raw cohorts become model input; stored with the model so new data
/// is prepared exactly like the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub schema: Schema,
    pub stats: StandardizationStats,
    pub window: WindowConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Parameters from the epoch with the lowest validation loss.
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub preprocessing: Preprocessing,
}

impl TrainedModel {
    pub fn kind(&self) -> ArchitectureKind {
        self.network.kind
    }

    pub fn best_val_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].val_loss
    }
}

/// Result of [`fit`] without the preprocessing metadata.
#[derive(Debug, Clone)]
pub struct Fit {
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl Fit {
    pub fn best_val_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].val_loss
    }
}

/// First epoch (1-based) whose validation loss is strictly below every
/// earlier one and not beaten later.
pub fn best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in val_losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i + 1, v));
        }
    }
    best.map(|(e, _)| e)
}

/// Minibatch Adam with validation-loss checkpointing. Runs all
/// `max_epochs` epochs and returns the best checkpoint.
pub fn fit(
    kind: ArchitectureKind,
    hp: &HyperParams,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<Fit> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::data(
            "training and validation sets must be non-empty",
        ));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::invalid("batch_size and max_epochs must be positive"));
    }
    if train.x.shape()[1..] != val.x.shape()[1..] {
        return Err(Error::shape(
            "training and validation grids differ in shape",
        ));
    }
    let mut init_rng = substream(cfg.seed, &[STREAM_INIT]);
    let mut shuffle_rng = substream(cfg.seed, &[STREAM_SHUFFLE]);
    let mut dropout_rng = substream(cfg.seed, &[STREAM_DROPOUT]);

    let mut net = Network::build(
        kind,
        hp,
        train.n_features(),
        train.n_windows(),
        &mut init_rng,
    )?;
    let mut adam = Adam::new(net.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(usize, f64, Network)> = None;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (xb, yb) = train.batch(chunk);
            let (loss, grads) = net.loss_and_grads(&xb, &yb, Some(&mut dropout_rng))?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut net.params_mut(), &grads)?;
        }
        let val_loss = validation_loss(&net, val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if best.as_ref().is_none_or(|(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, net.clone()));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss,
        });
    }
    let (best_epoch, _, network) = best.expect("at least one epoch");
    Ok(Fit {
        network,
        history,
        best_epoch,
    })
}

fn validation_loss(net: &Network, val: &Dataset) -> Result<f64> {
    let logits = net.forward(&val.x, None)?.logits;
    Ok(bce_with_logits(&logits, &val.y)?.0)
}

/// Trains on standardized grids and bundles the preprocessing with the
/// resulting model.
pub fn train(
    kind: ArchitectureKind,
    hp: &HyperParams,
    train_grids: &[WindowGrid],
    val_grids: &[WindowGrid],
    cfg: &TrainConfig,
    preprocessing: &Preprocessing,
) -> Result<TrainedModel> {
    let train_set = Dataset::from_grids(train_grids)?;
    let val_set = Dataset::from_grids(val_grids)?;
    let fit = fit(kind, hp, &train_set, &val_set, cfg)?;
    Ok(TrainedModel {
        network: fit.network,
        history: fit.history,
        best_epoch: fit.best_epoch,
        preprocessing: preprocessing.clone(),
    })
}

/// Stacks grids into a dataset after checking they fit the model.
pub fn model_input(model: &TrainedModel, grids: &[WindowGrid]) -> Result<Dataset> {
    let schema = &model.preprocessing.schema;
    for g in grids {
        if g.n_features != schema.len() || g.n_windows != model.network.n_windows {
            return Err(Error::data(format!(
                "grid for `{}` is {}x{}, model expects {}x{}",
                g.patient_id,
                g.n_windows,
                g.n_features,
                model.network.n_windows,
                schema.len()
            )));
        }
    }
    Dataset::from_grids(grids)
}

/// Evaluation-mode probability of `Uncontrolled` per grid.
pub fn predict(model: &TrainedModel, grids: &[WindowGrid]) -> Result<Vec<f64>> {
    model.network.predict(&model_input(model, grids)?.x)
}

/// Post-activation output of the layer just before the output unit,
/// `[n, units_dense]`.
pub fn extract_representation(model: &TrainedModel, grids: &[WindowGrid]) -> Result<Tensor> {
    model.network.representation(&model_input(model, grids)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_is_argmin_of_validation_history() {
        assert_eq!(best_epoch(&[0.70, 0.60, 0.65]), Some(2));
        assert_eq!(best_epoch(&[0.5, 0.5, 0.4, 0.4]), Some(3));
        assert_eq!(best_epoch(&[]), None);
    }
}
