use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, DocGradient, DropoutConfig, EncodedDoc, TaggerModel};
use crate::corpus::LabeledDocument;
use crate::nn::{clip_global_norm, AdamState, Params};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Learning rate during epoch `e` (from 0) is `lr · decay^e`.
    pub decay: f64,
    pub dropout: f64,
    pub dropout_embeddings: bool,
    pub dropout_hidden: bool,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Dev F1 must beat the best so far by more than this to count.
    pub min_improvement: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            decay: 0.9,
            dropout: 0.5,
            dropout_embeddings: true,
            dropout_hidden: true,
            batch_size: 20,
            max_epochs: 20,
            patience: 3,
            seed: 1,
            clip_norm: 5.0,
            min_improvement: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max_epochs");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }

    pub fn dropout_config(&self) -> DropoutConfig {
        DropoutConfig {
            rate: self.dropout,
            embeddings: self.dropout_embeddings,
            hidden: self.dropout_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Summed training NLL over the epoch, with dropout active.
    pub train_loss: f64,
    pub dev_weighted_f1: f64,
    pub dev_accuracy: f64,
    pub learning_rate: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch completed.
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub stopped_early: bool,
    /// Set when a non-finite loss or gradient aborted training.
    pub diverged: Option<String>,
}

/// RNG for dropout masks of training document `index` in `epoch`, independent
/// of how documents are scheduled across threads.
pub fn doc_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Mini-batch Adam on summed CRF loss with per-epoch dev evaluation and
/// early stopping. Returns the parameters from the best dev epoch.
///
/// Per-document gradients within a batch are computed in parallel (with the
/// `parallel` feature) and summed in batch order, so results do not depend on
/// thread count.
pub fn train(
    mut model: TaggerModel,
    cfg: &TrainConfig,
    train: &[LabeledDocument],
    dev: &[LabeledDocument],
) -> Result<(TaggerModel, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Config("train and dev sets must be non-empty".into()));
    }
    let encoded: Vec<(EncodedDoc, Vec<usize>)> = train
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| (model.encode_document(d), d.labels.iter().map(|l| l.id()).collect()))
        .collect();
    let drop = cfg.dropout_config();
    let mut adam = AdamState::new(cfg.lr, cfg.decay);
    let mut best = model.params.clone();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_dev_f1: f64::NEG_INFINITY,
        stopped_early: false,
        diverged: None,
    };
    let mut since_best = 0;

    'epochs: for epoch in 0..cfg.max_epochs {
        adam.set_epoch(epoch as u32);
        let order = epoch_order(cfg.seed, epoch, encoded.len());
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<DocGradient>> = par::map(batch, |&i| {
                let (doc, labels) = &encoded[i];
                model.loss_and_gradient(doc, labels, drop, &mut doc_rng(cfg.seed, epoch, i))
            });
            let mut total = model.params.zeros_like();
            for r in results {
                let g = r?;
                if !g.loss.is_finite() {
                    history.diverged = Some(format!("non-finite loss in epoch {}", epoch + 1));
                    break 'epochs;
                }
                epoch_loss += g.loss;
                g.accumulate_into(&mut total);
            }
            clip_global_norm(&mut total, cfg.clip_norm);
            match adam.step(&mut model.params, &total) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient(name)) => {
                    history.diverged = Some(format!("non-finite gradient in {name} in epoch {}", epoch + 1));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            if !model.params.all_finite() {
                history.diverged = Some(format!("non-finite parameter in epoch {}", epoch + 1));
                break 'epochs;
            }
        }

        let report = evaluate(&model, dev)?;
        let improved = report.weighted_f1 > history.best_dev_f1 + cfg.min_improvement;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: epoch_loss,
            dev_weighted_f1: report.weighted_f1,
            dev_accuracy: report.accuracy,
            learning_rate: adam.effective_lr(),
            improved,
        });
        if improved {
            history.best_dev_f1 = report.weighted_f1;
            history.best_epoch = epoch + 1;
            best = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = epoch + 1 < cfg.max_epochs;
                break;
            }
        }
    }

    if history.best_epoch == 0 {
        history.best_dev_f1 = 0.0;
    }
    model.params = best;
    Ok((model, history))
}
