//! Mini-batch momentum SGD on pre-shuffled targets with a plateau-driven
//! learning-rate schedule and best-validation checkpointing.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{mse_grad, mse_loss, EspcnModel, ModelGradients};
use crate::data::PatchPair;
use crate::error::{Error, Result};

/// Recorded in run metadata so histories can be reproduced elsewhere.
pub const PRNG_NAME: &str = "xoshiro256++ (seeded via splitmix64)";

const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub final_lr: f64,
    /// Multiplier applied to the learning rate on a validation plateau.
    pub lr_decay_factor: f64,
    /// Relative validation improvement below which the epoch counts as a plateau.
    pub plateau_threshold: f64,
    /// Stop after this many epochs without a new best validation loss.
    pub patience_epochs: usize,
    pub final_layer_lr_scale: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub rng_seed: u64,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.01,
            final_lr: 0.0001,
            lr_decay_factor: 0.1,
            plateau_threshold: 1e-4,
            patience_epochs: 100,
            final_layer_lr_scale: 0.1,
            batch_size: 4,
            momentum: 0.9,
            rng_seed: 0,
            max_epochs: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.final_lr > 0.0 && self.initial_lr > self.final_lr) {
            return bad(format!(
                "need initial_lr > final_lr > 0, got {} and {}",
                self.initial_lr, self.final_lr
            ));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad(format!("lr_decay_factor must be in (0, 1), got {}", self.lr_decay_factor));
        }
        if !(self.plateau_threshold >= 0.0) {
            return bad(format!("plateau_threshold must be >= 0, got {}", self.plateau_threshold));
        }
        if self.patience_epochs == 0 {
            return bad("patience_epochs must be >= 1".into());
        }
        if !(self.final_layer_lr_scale > 0.0) {
            return bad(format!(
                "final_layer_lr_scale must be positive, got {}",
                self.final_layer_lr_scale
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<EpochRecord>,
    pub initial_val_loss: f64,
    /// Epoch of the returned checkpoint; 0 means the initial model.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub seed: u64,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# prng={PRNG_NAME} seed={}", self.seed);
        out.push_str("epoch,train_loss,val_loss,lr\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", row.epoch, row.train_loss, row.val_loss, row.lr);
        }
        out
    }
}

/// Momentum SGD. The final layer's step is scaled by `final_layer_lr_scale`.
#[derive(Clone, Debug)]
pub struct Sgd {
    momentum: f64,
    final_layer_lr_scale: f64,
    velocity: ModelGradients,
}

impl Sgd {
    pub fn new(model: &EspcnModel, config: &TrainConfig) -> Self {
        Sgd {
            momentum: config.momentum,
            final_layer_lr_scale: config.final_layer_lr_scale,
            velocity: ModelGradients::zeros_like(model),
        }
    }

    /// `v <- momentum * v - lr_l * g; w <- w + v`
    pub fn step(&mut self, model: &mut EspcnModel, grads: &ModelGradients, lr: f64) -> Result<()> {
        if !grads.matches(model) || !self.velocity.matches(model) {
            return Err(Error::InvalidShape("gradients do not match the model".into()));
        }
        let last = model.layers().len() - 1;
        for (l, (g, v)) in grads.layers.iter().zip(self.velocity.layers.iter_mut()).enumerate() {
            let rate = if l == last { lr * self.final_layer_lr_scale } else { lr };
            let layer = model.layer_mut(l);
            let params = layer.kernel.weights_mut().iter_mut().zip(&g.weights).zip(v.weights.iter_mut());
            for ((w, &gw), vw) in params {
                *vw = self.momentum * *vw - rate * gw;
                *w += *vw;
            }
            let params = layer.kernel.bias_mut().iter_mut().zip(&g.bias).zip(v.bias.iter_mut());
            for ((b, &gb), vb) in params {
                *vb = self.momentum * *vb - rate * gb;
                *b += *vb;
            }
        }
        Ok(())
    }
}

/// Sorts patches by source, offset and finally content so that training does
/// not depend on the order the caller supplied them in.
pub fn canonical_order(dataset: &[PatchPair]) -> Vec<&PatchPair> {
    let mut refs: Vec<&PatchPair> = dataset.iter().collect();
    refs.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then(a.offset.cmp(&b.offset))
            .then_with(|| cmp_slices(a.lr_patch.data(), b.lr_patch.data()))
            .then_with(|| cmp_slices(a.target_preshuffled.data(), b.target_preshuffled.data()))
    });
    refs
}

fn cmp_slices(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Trains on `dataset`, holding out the last 10% of a seeded shuffle for
/// validation (a single patch validates against itself).
pub fn train(model: &EspcnModel, dataset: &[PatchPair], config: &TrainConfig) -> Result<(EspcnModel, TrainHistory)> {
    train_observed(model, dataset, config, |_| {})
}

pub fn train_observed(
    model: &EspcnModel,
    dataset: &[PatchPair],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(EspcnModel, TrainHistory)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ordered = canonical_order(dataset);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.rng_seed);
    ordered.shuffle(&mut rng);
    let n = ordered.len();
    let (train_set, val_set) = if n == 1 {
        (ordered.clone(), ordered)
    } else {
        let n_val = ((n as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, n - 1);
        let val = ordered.split_off(n - n_val);
        (ordered, val)
    };
    run(model, train_set, &val_set, config, rng, on_epoch)
}

/// Trains with an explicit validation set. Both sets are put in canonical
/// order first.
pub fn train_with_validation(
    model: &EspcnModel,
    train_set: &[PatchPair],
    val_set: &[PatchPair],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(EspcnModel, TrainHistory)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rng = Xoshiro256PlusPlus::seed_from_u64(config.rng_seed);
    let val = canonical_order(val_set);
    run(model, canonical_order(train_set), &val, config, rng, on_epoch)
}

fn check_pairs(model: &EspcnModel, pairs: &[&PatchPair]) -> Result<()> {
    let r2c = model.channels() * model.upscale_ratio() * model.upscale_ratio();
    for p in pairs {
        let (h, w, c) = p.lr_patch.shape();
        if c != model.channels() {
            return Err(Error::ChannelMismatch {
                expected: model.channels(),
                found: c,
            });
        }
        if p.target_preshuffled.shape() != (h, w, r2c) {
            return Err(Error::ShapeMismatch {
                expected: (h, w, r2c),
                found: p.target_preshuffled.shape(),
            });
        }
    }
    Ok(())
}

fn validation_loss(model: &EspcnModel, val: &[&PatchPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in val {
        let pred = model.forward_preshuffle(&p.lr_patch)?;
        total += mse_loss(&pred, &p.target_preshuffled)?;
    }
    Ok(total / val.len() as f64)
}

fn run(
    initial: &EspcnModel,
    mut train_set: Vec<&PatchPair>,
    val_set: &[&PatchPair],
    config: &TrainConfig,
    mut rng: Xoshiro256PlusPlus,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(EspcnModel, TrainHistory)> {
    config.validate()?;
    check_pairs(initial, &train_set)?;
    check_pairs(initial, val_set)?;

    let mut model = initial.clone();
    let mut sgd = Sgd::new(&model, config);
    let initial_val = validation_loss(&model, val_set)?;
    if !initial_val.is_finite() {
        return Err(Error::Diverged { epoch: 0, what: "validation" });
    }
    let mut history = TrainHistory {
        rows: Vec::new(),
        initial_val_loss: initial_val,
        best_epoch: 0,
        best_val_loss: initial_val,
        seed: config.rng_seed,
    };
    let mut best = model.clone();
    let mut prev_val = initial_val;
    let mut lr = config.initial_lr;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        if history.best_val_loss == 0.0 {
            break;
        }
        train_set.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in train_set.chunks(config.batch_size) {
            let mut grads = ModelGradients::zeros_like(&model);
            let weight = 1.0 / batch.len() as f64;
            // Patch gradients are reduced sequentially in batch order.
            for pair in batch {
                let (pred, cache) = model.forward_preshuffle_cached(&pair.lr_patch)?;
                loss_sum += mse_loss(&pred, &pair.target_preshuffled)?;
                let g = mse_grad(&pred, &pair.target_preshuffled)?;
                grads.add_scaled(&model.backward(Some(&cache), &g)?, weight);
            }
            sgd.step(&mut model, &grads, lr)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch, what: "training" });
        }
        let val_loss = validation_loss(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, what: "validation" });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        };
        on_epoch(&record);
        history.rows.push(record);

        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience_epochs {
            break;
        }
        let improvement = if prev_val > 0.0 { (prev_val - val_loss) / prev_val } else { 0.0 };
        if improvement < config.plateau_threshold {
            lr = (lr * config.lr_decay_factor).max(config.final_lr);
        }
        prev_val = val_loss;
    }
    Ok((best, history))
}
