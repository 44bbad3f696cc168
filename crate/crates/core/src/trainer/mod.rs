//! Linear projection over hashed bag-of-words features, trained with a
//! temperature-scaled InfoNCE loss over hard and in-batch negatives.

mod checkpoint;
mod loss;
mod optim;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::{hashed_features, EmbedError, Embedder, Embedding, SparseVec};
use crate::scalar::{normalize_in_place, Scalar};
use crate::seed;
use crate::serialize::TextView;
use crate::table::Table;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{infonce_from_logits, infonce_loss, loss_gradient, phi, Gradient};
pub use optim::{train, Optimizer, TrainConfig, TrainOutcome};

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_D_OUT: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {loss}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One anchor with its generated positive and mined hard negatives, already
/// serialized to text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSample {
    pub anchor: String,
    pub positive: String,
    pub negatives: Vec<String>,
}

/// `normalize(W · x)` for hashed features `x`. `weights` is `d_out × d_in`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel<T> {
    pub d_in: usize,
    pub d_out: usize,
    pub tau: T,
    /// Seed of the feature hash the weights were trained against.
    pub hash_seed: u64,
    pub weights: Vec<T>,
}

impl<T: Scalar> ProjectionModel<T> {
    /// Gaussian init with variance `1 / d_out`, which roughly preserves
    /// inner products of the input features.
    pub fn random(d_in: usize, d_out: usize, tau: T, hash_seed: u64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let scale = 1.0 / (d_out as f64).sqrt();
        let weights = (0..d_in * d_out)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::of(z * scale)
            })
            .collect();
        ProjectionModel { d_in, d_out, tau, hash_seed, weights }
    }

    /// `W[i][i] = 1` for `i < min(d_out, d_in)`, zero elsewhere.
    pub fn identity(d_in: usize, d_out: usize, tau: T, hash_seed: u64) -> Self {
        let mut weights = vec![T::zero(); d_in * d_out];
        for i in 0..d_in.min(d_out) {
            weights[i * d_in + i] = T::one();
        }
        ProjectionModel { d_in, d_out, tau, hash_seed, weights }
    }

    pub fn features(&self, text: &str) -> SparseVec<T> {
        hashed_features(text, self.d_in, self.hash_seed)
    }

    /// `W · x` before normalization.
    pub fn project(&self, x: &SparseVec<T>) -> Vec<T> {
        (0..self.d_out)
            .map(|r| {
                let row = &self.weights[r * self.d_in..(r + 1) * self.d_in];
                x.indices.iter().zip(&x.values).fold(T::zero(), |acc, (&c, &v)| acc + row[c as usize] * v)
            })
            .collect()
    }

    pub fn encode_text(&self, text: &str) -> Embedding<T> {
        let mut u = self.project(&self.features(text));
        normalize_in_place(&mut u);
        Embedding::from_raw(u)
    }

    /// Serializes `t` through `view` and encodes the text.
    pub fn encode(&self, t: &Table, view: &TextView) -> Embedding<T> {
        self.encode_text(&view.text(t))
    }

    pub fn is_finite(&self) -> bool {
        self.tau.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

impl<T: Scalar> Embedder<T> for ProjectionModel<T> {
    fn dimension(&self) -> usize {
        self.d_out
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding<T>>, EmbedError> {
        Ok(texts.iter().map(|s| self.encode_text(s)).collect())
    }
}
