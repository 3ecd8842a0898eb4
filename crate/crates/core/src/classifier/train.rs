//! Mini-batch Adam training with seeded shuffling and early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{argmax, softmax, Cnn, Mode};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Stop after this many epochs without a relative loss drop of `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
    /// Stop once an epoch's mean loss falls below this (converged).
    pub target_loss: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            patience: 3,
            min_delta: 1e-3,
            target_loss: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation(
                "learning rate must be finite and non-negative",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.adam_eps <= 0.0
        {
            return Err(Error::validation(
                "Adam betas must lie in [0, 1) and eps be positive",
            ));
        }
        Ok(())
    }
}

/// Per-epoch mean cross-entropy and training accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
    pub steps: usize,
}

/// Adam state, one moment pair per parameter tensor.
pub struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Cnn<T>, cfg: &TrainConfig) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
            lr: cfg.learning_rate,
            b1: cfg.beta1,
            b2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }

    pub fn step(&mut self, model: &mut Cnn<T>, grads: &super::model::Gradients<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.b1), T::of(self.b2));
        let c1 = T::of(1.0 - self.b1.powi(self.t));
        let c2 = T::of(1.0 - self.b2.powi(self.t));
        let lr = T::of(self.lr);
        let eps = T::of(self.eps);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Train `model` in place on `(inputs, labels)`. Shuffling and every other
/// random choice derive from `cfg.seed`, so runs are bit-reproducible.
pub fn train<T: Scalar>(
    model: &mut Cnn<T>,
    inputs: &[Vec<T>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::validation("input and label counts differ"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.config.n_classes) {
        return Err(Error::validation(format!(
            "label {bad} outside [0, {})",
            model.config.n_classes
        )));
    }
    let mut rng = crate::rng::rng(crate::rng::derive_seed(cfg.seed, &[0x7a41]));
    let mut adam = Adam::new(model, cfg);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut hist = TrainHistory {
        epoch_loss: Vec::new(),
        epoch_accuracy: Vec::new(),
        steps: 0,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[T]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let cache = model.forward(&batch, Mode::Train)?;
            let (loss, dlogits) = Cnn::loss_and_dlogits(&cache, &ys)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch, step });
            }
            correct += cache
                .logits
                .iter()
                .zip(&ys)
                .filter(|(l, y)| argmax(&softmax(l)) == **y)
                .count();
            loss_sum += loss * chunk.len() as f64;
            let grads = model.backward(&cache, &dlogits)?;
            adam.step(model, &grads);
            model.update_running_stats(&cache);
            hist.steps += 1;
        }
        if !model.is_finite() {
            return Err(Error::NonFinite {
                layer: format!("parameters after epoch {epoch}"),
            });
        }
        let mean = loss_sum / inputs.len() as f64;
        hist.epoch_loss.push(mean);
        hist.epoch_accuracy
            .push(correct as f64 / inputs.len() as f64);
        log::debug!(
            "epoch {epoch}: loss {mean:.5}, train acc {:.4}",
            correct as f64 / inputs.len() as f64
        );
        if mean < cfg.target_loss {
            break;
        }
        if mean < best * (1.0 - cfg.min_delta) {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(hist)
}

/// Eval-mode predictions for many inputs, batched to bound memory.
pub fn predict_all<T: Scalar>(model: &Cnn<T>, inputs: &[Vec<T>]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(64) {
        let batch: Vec<&[T]> = chunk.iter().map(|v| v.as_slice()).collect();
        for p in model.probabilities(&batch, Mode::Eval)? {
            let k = argmax(&p);
            out.push((k, p[k]));
        }
    }
    Ok(out)
}
