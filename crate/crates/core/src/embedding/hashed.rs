//! Signed feature hashing over a bag of words.

use super::{Embedder, EmbedError, Embedding};
use crate::scalar::Scalar;
use crate::seed::{fnv1a, mix64};

/// Lowercased alphanumeric runs.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bucket and sign of a token. The sign comes from a bit of a second mix of
/// the hash so it is independent of the bucket.
fn bucket(token: &str, dim: usize, seed: u64) -> (usize, bool) {
    let h = mix64(fnv1a(token.as_bytes()) ^ mix64(seed));
    ((h % dim as u64) as usize, mix64(h) & 1 == 1)
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec<T> {
    pub indices: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseVec<T> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut out = vec![T::zero(); dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }
}

/// L2-normalized signed token counts in sparse form.
pub fn hashed_features<T: Scalar>(s: &str, dim: usize, seed: u64) -> SparseVec<T> {
    let mut acc: Vec<(u32, f64)> = tokenize(s)
        .iter()
        .map(|tok| {
            let (i, negative) = bucket(tok, dim, seed);
            (i as u32, if negative { -1.0 } else { 1.0 })
        })
        .collect();
    acc.sort_unstable_by_key(|&(i, _)| i);
    let mut indices = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, v) in acc {
        if indices.last() == Some(&i) {
            *values.last_mut().unwrap() += v;
        } else {
            indices.push(i);
            values.push(v);
        }
    }
    // drop buckets where opposite signs cancelled
    let (indices, values): (Vec<u32>, Vec<f64>) = indices.into_iter().zip(values).filter(|&(_, v)| v != 0.0).unzip();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let values = values.into_iter().map(|v| T::of(v / norm)).collect();
    SparseVec { indices, values }
}

/// Dense hashed bag-of-words embedding of dimension `dim`.
pub fn embed_hashed_bow<T: Scalar>(s: &str, dim: usize, seed: u64) -> Embedding<T> {
    Embedding::from_raw(hashed_features::<T>(s, dim, seed).to_dense(dim))
}

/// Model-free encoder: deterministic in text, dimension and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBow {
    pub dimension: usize,
    pub seed: u64,
}

impl HashedBow {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension >= 2, "hashed embedding dimension must be at least 2");
        HashedBow { dimension, seed }
    }

    pub fn features<T: Scalar>(&self, s: &str) -> SparseVec<T> {
        hashed_features(s, self.dimension, self.seed)
    }
}

impl<T: Scalar> Embedder<T> for HashedBow {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding<T>>, EmbedError> {
        Ok(texts.iter().map(|t| embed_hashed_bow(t, self.dimension, self.seed)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn tokenizer_splits_and_lowercases() {
        assert_eq!(tokenize("Year_v2, HOST-city. 2000"), ["year", "v2", "host", "city", "2000"]);
        assert!(tokenize(" ,.; ").is_empty());
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v: Embedding<f64> = embed_hashed_bow("", 64, 1);
        assert!(v.is_zero());
        assert_eq!(v.dim(), 64);
    }

    #[test]
    fn identical_texts_identical_vectors() {
        let a: Embedding<f64> = embed_hashed_bow("Olympic games hosts", 1024, 7);
        let b: Embedding<f64> = embed_hashed_bow("Olympic games hosts", 1024, 7);
        assert_eq!(a, b);
        let c: Embedding<f64> = embed_hashed_bow("Olympic games hosts", 1024, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_norm_over_random_strings() {
        let mut rng = crate::seed::rng(3);
        let alphabet: Vec<char> = "abcdefghij klmnop,.0123".chars().collect();
        let mut checked = 0;
        for _ in 0..1000 {
            let len = rng.random_range(1..60);
            let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
            let v: Embedding<f64> = embed_hashed_bow(&s, 1024, 0);
            if v.is_zero() {
                continue;
            }
            assert!((v.norm() - 1.0).abs() < 1e-9, "{s}");
            checked += 1;
        }
        assert!(checked > 900);
    }

    #[test]
    fn sparse_matches_dense_and_sign_is_mixed() {
        let text = "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu";
        let sp: SparseVec<f64> = hashed_features(text, 4096, 0);
        let dense: Embedding<f64> = embed_hashed_bow(text, 4096, 0);
        assert_eq!(sp.to_dense(4096), dense.as_slice());
        assert!(sp.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(sp.values.iter().any(|&v| v < 0.0) && sp.values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn repeated_token_accumulates() {
        let sp: SparseVec<f64> = hashed_features("word word word", 32, 0);
        assert_eq!(sp.nnz(), 1);
        assert!((sp.values[0].abs() - 1.0).abs() < 1e-15);
    }
}
