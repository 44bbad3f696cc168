//! Embedding vectors, similarity and embedding providers.

mod hashed;
mod remote;

use serde::{Deserialize, Serialize};

use crate::scalar::{dot, l2_norm, normalize_in_place, Scalar};

pub use hashed::{embed_hashed_bow, hashed_features, tokenize, HashedBow, SparseVec};
pub use remote::{RemoteEmbedConfig, RemoteEmbedder};

pub const DEFAULT_DIMENSION: usize = 1024;
/// Weight of the structural channel in fused scoring.
pub const DEFAULT_FUSION_WEIGHT: f64 = 0.9;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding `{id}`: {message}")]
    Item { id: String, message: String },
}

/// Fixed-length real vector. Providers return unit-norm vectors, or the
/// zero vector for text without tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    /// Wraps `values` as they are.
    pub fn from_raw(values: Vec<T>) -> Self {
        Embedding { values }
    }

    /// Wraps `values` scaled to unit length (zero stays zero).
    pub fn normalized(mut values: Vec<T>) -> Self {
        normalize_in_place(&mut values);
        Embedding { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding { values: vec![T::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        l2_norm(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

/// `a·b / (|a||b|)`, defined as 0 when either side is the zero vector.
pub fn cosine_similarity<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::Dimension { left: a.dim(), right: b.dim() });
    }
    Ok(cosine_slices(a.as_slice(), b.as_slice()))
}

pub(crate) fn cosine_slices<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na.is_zero() || nb.is_zero() {
        return T::zero();
    }
    let c = dot(a, b) / (na * nb);
    c.max(-T::one()).min(T::one())
}

/// Weighted blend of a structural similarity and a text similarity:
/// `w * structural + (1 - w) * text`.
pub fn fused_similarity<T: Scalar>(structural: T, text: T, w: T) -> T {
    w * structural + (T::one() - w) * text
}

/// Text-to-vector provider.
pub trait Embedder<T: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding<T>>, EmbedError>;

    fn embed(&self, text: &str) -> Result<Embedding<T>, EmbedError> {
        let mut v = self.embed_batch(&[text.to_string()])?;
        v.pop().ok_or_else(|| EmbedError::Provider("empty batch result".into()))
    }
}

/// Provider selection as it appears in configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingProviderKind {
    HashedBow { dimension: usize, seed: u64 },
    Remote(RemoteEmbedConfig),
}

impl EmbeddingProviderKind {
    pub fn build<T: Scalar>(&self) -> Result<Box<dyn Embedder<T>>, EmbedError> {
        Ok(match self {
            EmbeddingProviderKind::HashedBow { dimension, seed } => Box::new(HashedBow::new(*dimension, *seed)),
            EmbeddingProviderKind::Remote(cfg) => Box::new(RemoteEmbedder::new(cfg.clone())?),
        })
    }
}
