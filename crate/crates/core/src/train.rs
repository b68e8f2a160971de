//! Mini-batch training with RMSprop and early stopping on validation loss.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::model::{Gradients, Model};
use crate::nn::{self, Mode};
use crate::optim::{Rmsprop, RmspropConfig};
use crate::registration::FusedSample;
use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: RmspropConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    /// Return the parameters of the best validation epoch rather than the last.
    pub restore_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: RmspropConfig::default(),
            batch_size: 12,
            max_epochs: 160,
            patience: 10,
            val_fraction: 0.2,
            seed: 0,
            restore_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction {} must lie in (0, 1)",
                self.val_fraction
            )));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training-mode batch loss, weighted by batch size.
    pub train_loss: f64,
    /// Accuracy of the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Whether the patience rule ended training before `max_epochs`.
    pub early_stopped: bool,
    pub train_size: usize,
    pub val_size: usize,
    /// Digest of the returned parameters, see [`Model::digest`].
    pub parameter_digest: String,
}

/// Outcome of feeding one validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Shuffles `0..n` with `seed` and splits off the last `n - floor((1 - val_fraction) n)`
/// indices for validation.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::derived(seed, SPLIT_STREAM).shuffle(&mut idx);
    let train_len = libm::floor((1.0 - val_fraction) * n as f64) as usize;
    let val = idx.split_off(train_len.min(n));
    (idx, val)
}

const SPLIT_STREAM: u64 = 0x5350_4c54;
const EPOCH_STREAM: u64 = 0x4550_4f43;

fn targets(samples: &[&FusedSample]) -> Vec<f32> {
    samples.iter().map(|s| s.label.target() as f32).collect()
}

fn accuracy(probs: &[f32], labels: impl Iterator<Item = Label>) -> f64 {
    let n = probs.len();
    if n == 0 {
        return 0.0;
    }
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, l)| Label::from_probability(p as f64) == *l)
        .count();
    correct as f64 / n as f64
}

/// Eval-mode mean loss, accuracy and probabilities over `samples`.
pub fn evaluate(model: &Model<f32>, samples: &[&FusedSample]) -> Result<(f64, f64, Vec<f32>)> {
    let probs = samples
        .iter()
        .map(|s| model.predict(&s.stacked, s.radar.as_ref()))
        .collect::<Result<Vec<f32>>>()?;
    let (loss, _) = nn::bce_loss(
        &Tensor::vector(probs.clone()),
        &Tensor::vector(targets(samples)),
    )?;
    let acc = accuracy(&probs, samples.iter().map(|s| s.label));
    Ok((loss as f64, acc, probs))
}

/// Trains on a seeded random split of `dataset`.
pub fn train(
    model: Model<f32>,
    dataset: &[FusedSample],
    cfg: &TrainConfig,
) -> Result<(Model<f32>, TrainReport)> {
    train_with_observer(model, dataset, cfg, |_| {})
}

/// As [`train`], calling `observer` after every epoch.
pub fn train_with_observer(
    model: Model<f32>,
    dataset: &[FusedSample],
    cfg: &TrainConfig,
    observer: impl FnMut(&EpochRecord),
) -> Result<(Model<f32>, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Precondition("dataset is empty".into()));
    }
    let (train_idx, val_idx) = split_indices(dataset.len(), cfg.val_fraction, cfg.seed);
    let train_set: Vec<&FusedSample> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let val_set: Vec<&FusedSample> = val_idx.iter().map(|&i| &dataset[i]).collect();
    train_on_split(model, &train_set, &val_set, cfg, observer)
}

/// Trains on an explicit train/validation split.
pub fn train_on_split(
    mut model: Model<f32>,
    train_set: &[&FusedSample],
    val_set: &[&FusedSample],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<(Model<f32>, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Precondition(format!(
            "need non-empty training and validation splits, got {} and {}",
            train_set.len(),
            val_set.len()
        )));
    }
    let uav = train_set.iter().filter(|s| s.label == Label::Uav).count();
    if uav == 0 || uav == train_set.len() {
        return Err(Error::Precondition(format!(
            "training split of {} samples contains a single class ({} UAV)",
            train_set.len(),
            uav
        )));
    }
    for s in train_set.iter().chain(val_set) {
        model.check_input(&s.stacked, s.radar.as_ref())?;
    }

    let mut rng = Rng::derived(cfg.seed, EPOCH_STREAM);
    let mut optimizer = Rmsprop::new(cfg.optimizer, model.params());
    let mut grads = Gradients::zeros_like(&model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut early_stopped = false;

    for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&Tensor<f32>, Option<&Tensor<f32>>)> = chunk
                .iter()
                .map(|&i| (&train_set[i].stacked, train_set[i].radar.as_ref()))
                .collect();
            let tgt: Vec<f32> = chunk
                .iter()
                .map(|&i| train_set[i].label.target() as f32)
                .collect();
            grads.tensors.iter_mut().for_each(|g| g.fill(0.0));
            let (loss, probs) =
                model.accumulate_batch(&batch, &tgt, Mode::Train, &mut rng, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NumericFault(format!(
                    "non-finite loss {} at epoch {} batch {}",
                    loss, epoch, b
                )));
            }
            loss_sum += loss as f64 * chunk.len() as f64;
            correct += probs
                .iter()
                .zip(chunk)
                .filter(|(&p, &i)| Label::from_probability(p as f64) == train_set[i].label)
                .count();
            optimizer.step(&mut model.params_mut(), &grads.refs())?;
        }
        let (val_loss, val_accuracy, _) = evaluate(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::NumericFault(format!(
                "non-finite validation loss at epoch {}",
                epoch
            )));
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        epochs.push(record);
        observer(&record);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => {
                if cfg.restore_best {
                    best_params.clone_from(&model);
                }
            }
            StopDecision::Wait => {}
            StopDecision::Stop => {
                early_stopped = true;
                break;
            }
        }
    }
    let stopped_epoch = epochs.len();
    let (best_epoch, best_val_loss) = stopper.best();
    if cfg.restore_best {
        model = best_params;
    }
    let report = TrainReport {
        epochs,
        stopped_epoch,
        best_epoch,
        best_val_loss,
        early_stopped,
        train_size: train_set.len(),
        val_size: val_set.len(),
        parameter_digest: model.digest(),
    };
    Ok((model, report))
}

/// Seed for the `k`-th repeat of a seeded protocol (`seed`, `seed + 1`, ...).
pub fn repeat_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

/// Independent seed for model initialisation in a run seeded with `seed`.
pub fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, 0x494e_4954)
}
