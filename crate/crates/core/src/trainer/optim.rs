use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss, prepare};
use super::{ProjectionModel, TrainError, TrainSample};
use crate::scalar::Scalar;
use crate::seed;
use crate::serialize::{truncate_tokens, DEFAULT_TOKEN_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub n_hard: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub token_cap: usize,
    pub optimizer: Optimizer,
    /// Use the other samples' positives as extra negatives.
    pub in_batch_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            n_hard: 15,
            learning_rate: 0.5,
            epochs: 5,
            seed: 0,
            token_cap: DEFAULT_TOKEN_CAP,
            optimizer: Optimizer::Sgd,
            in_batch_negatives: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch_size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} is not a finite non-negative number", self.learning_rate)));
        }
        if self.token_cap == 0 {
            return Err(TrainError::Config("token_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: ProjectionModel<T>,
    /// Mean per-sample loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

/// Mini-batch training. Batches are drawn from a per-epoch shuffle seeded
/// by `cfg.seed`, so two runs with the same inputs produce the same weights.
pub fn train<T: Scalar>(mut model: ProjectionModel<T>, data: &[TrainSample], cfg: &TrainConfig) -> Result<TrainOutcome<T>, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let cap = |s: &str| truncate_tokens(s, cfg.token_cap).to_string();
    let prepared: Vec<_> = data
        .iter()
        .map(|s| {
            let s = TrainSample { anchor: cap(&s.anchor), positive: cap(&s.positive), negatives: s.negatives.iter().map(|n| cap(n)).collect() };
            prepare(&model, &s, cfg.n_hard)
        })
        .collect();
    let lr = T::of(cfg.learning_rate);
    let mut grad = vec![T::zero(); model.weights.len()];
    let mut adam = match cfg.optimizer {
        Optimizer::Adam { .. } => Some(AdamState { m: grad.clone(), v: grad.clone(), step: 0 }),
        Optimizer::Sgd => None,
    };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(cfg.seed, epoch as u64)));
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<_> = chunk.iter().map(|&i| prepared[i].clone()).collect();
            grad.iter_mut().for_each(|g| *g = T::zero());
            let loss = batch_loss(&model, &batch, cfg.in_batch_negatives, Some(&mut grad)).as_f64();
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b, loss });
            }
            total += loss * chunk.len() as f64;
            match (&cfg.optimizer, adam.as_mut()) {
                (Optimizer::Adam { beta1, beta2, eps }, Some(st)) => {
                    st.step += 1;
                    let (b1, b2) = (T::of(*beta1), T::of(*beta2));
                    let c1 = T::one() - b1.powi(st.step);
                    let c2 = T::one() - b2.powi(st.step);
                    let eps = T::of(*eps);
                    for ((w, g), (m, v)) in model.weights.iter_mut().zip(&grad).zip(st.m.iter_mut().zip(st.v.iter_mut())) {
                        *m = b1 * *m + (T::one() - b1) * *g;
                        *v = b2 * *v + (T::one() - b2) * *g * *g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
                _ => {
                    for (w, g) in model.weights.iter_mut().zip(&grad) {
                        *w -= lr * *g;
                    }
                }
            }
        }
        let mean = total / prepared.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome { model, epoch_losses })
}
