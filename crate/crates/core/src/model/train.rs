//! Adam training with early stopping on validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Classifier, Cnn, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::synthdata::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            learning_rate: 1e-4,
            batch_size: 64,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::validation("max_epochs, batch_size and patience must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub best: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub log: Vec<EpochLog>,
}

struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &ModelParams) -> Self {
        Adam { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    fn update(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (((p, g), m), v) in params.convs.iter_mut().zip(&grads.convs).zip(&mut self.m.convs).zip(&mut self.v.convs) {
            let pairs = [(&mut p.weight, &g.weight, &mut m.weight, &mut v.weight), (&mut p.bias, &g.bias, &mut m.bias, &mut v.bias)];
            for (pw, gw, mw, vw) in pairs {
                for i in 0..pw.len() {
                    mw[i] = BETA1 * mw[i] + (1.0 - BETA1) * gw[i];
                    vw[i] = BETA2 * vw[i] + (1.0 - BETA2) * gw[i] * gw[i];
                    pw[i] -= lr * (mw[i] / c1) / ((vw[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

fn add_into(acc: &mut ModelParams, other: &ModelParams) {
    for (a, o) in acc.convs.iter_mut().zip(&other.convs) {
        a.weight.iter_mut().zip(&o.weight).for_each(|(x, y)| *x += y);
        a.bias.iter_mut().zip(&o.bias).for_each(|(x, y)| *x += y);
    }
}

fn scale(p: &mut ModelParams, s: f64) {
    for c in &mut p.convs {
        c.weight.iter_mut().chain(c.bias.iter_mut()).for_each(|x| *x *= s);
    }
}

// Per-sample gradients are accumulated over fixed chunks and then summed in
// chunk order, so the result does not depend on the thread count.
const CHUNK: usize = 8;

/// Fraction of `data` classified correctly.
pub fn accuracy(model: &Cnn, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("empty dataset"));
    }
    let correct: usize = (0..data.len())
        .into_par_iter()
        .map(|i| model.predict(data.input(i)).map(|p| usize::from(p.argmax() == data.labels[i])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(correct as f64 / data.len() as f64)
}

/// Trains a freshly initialized model (seeded by `cfg.seed`) and returns the
/// checkpoint with the best validation accuracy.
pub fn train(spec: &ModelSpec, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = ModelParams::init(spec, cfg.seed)?;
    train_from(spec, params, train_set, val_set, cfg)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(spec: &ModelSpec, params: ModelParams, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::validation("training and validation sets must be non-empty"));
    }
    for d in [train_set, val_set] {
        if d.sample_width() != spec.input_size() {
            return Err(Error::shape(spec.input_size(), d.sample_width()));
        }
        if d.labels.iter().any(|&l| l >= spec.classes) {
            return Err(Error::validation("label outside the class range"));
        }
    }
    let mut model = Cnn::new(spec.clone(), params)?;
    let mut adam = Adam::new(model.params());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut best = (model.params().clone(), f64::NEG_INFINITY, 0usize);
    let mut log = Vec::new();
    let mut stale = 0;
    let classes = spec.classes;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let parts: Vec<(ModelParams, f64, usize)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = model.params().zeros_like();
                    let mut loss = 0.0;
                    let mut hits = 0;
                    let mut target = vec![0.0; classes];
                    for &i in chunk {
                        let label = train_set.labels[i];
                        target[label] = 1.0;
                        let (l, p) = model.accumulate_gradient(train_set.input(i), &target, &mut g);
                        target[label] = 0.0;
                        loss += l;
                        hits += usize::from(p.argmax() == label);
                    }
                    (g, loss, hits)
                })
                .collect();
            let mut iter = parts.into_iter();
            let (mut grads, mut loss, mut hits) = iter.next().expect("non-empty batch");
            for (g, l, h) in iter {
                add_into(&mut grads, &g);
                loss += l;
                hits += h;
            }
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became non-finite in epoch {epoch}")));
            }
            scale(&mut grads, 1.0 / batch.len() as f64);
            adam.update(model.params_mut(), &grads, cfg.learning_rate);
            loss_sum += loss;
            correct += hits;
        }
        let val_accuracy = accuracy(&model, val_set)?;
        let improved = val_accuracy > best.1;
        if improved {
            best = (model.params().clone(), val_accuracy, epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy,
            best: improved,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.4} val acc {:.4}{}",
            entry.train_loss,
            entry.train_accuracy,
            val_accuracy,
            if improved { " *" } else { "" }
        );
        log.push(entry);
        if stale >= cfg.patience || best.1 >= 1.0 && stale > 0 {
            break;
        }
    }
    Ok(TrainOutcome { params: best.0, best_epoch: best.2, best_val_accuracy: best.1, log })
}
