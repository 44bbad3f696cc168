//! Exact top-k retrieval over embedded tables and the evaluation protocol
//! (recall@k, nDCG@k, anchor-level splits).

mod eval;
mod metrics;
mod split;

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{cosine_slices, fused_similarity, EmbedError, Embedder, Embedding};
use crate::scalar::Scalar;
use crate::serialize::TextView;
use crate::table::Table;

pub use eval::{evaluate, evaluate_with, metric_key, EvalReport, Query};
pub use metrics::{ndcg_at_k, recall_at_k};
pub use split::{split_dataset, DatasetSplit, SplitRatios};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("id `{0}` is not in the index")]
    MissingId(String),
    #[error("duplicate id `{0}` in index")]
    DuplicateId(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid split ratios: {0}")]
    Ratios(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEntry<T> {
    pub table_id: String,
    pub vector: Embedding<T>,
}

/// Immutable collection of embedded tables with id lookup.
#[derive(Debug, Clone)]
pub struct Index<T> {
    entries: Vec<IndexEntry<T>>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> Index<T> {
    pub fn new(entries: Vec<IndexEntry<T>>) -> Result<Self, RetrievalError> {
        let mut by_id = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if by_id.insert(e.table_id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateId(e.table_id.clone()));
            }
        }
        Ok(Index { entries, by_id })
    }

    pub fn entries(&self) -> &[IndexEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&Embedding<T>> {
        self.position(id).map(|i| &self.entries[i].vector)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }
}

const EMBED_CHUNK: usize = 256;

/// Embeds every table's text view. A failing batch is retried item by item
/// so the error names the table.
pub fn build_index<T: Scalar>(corpus: &[Table], embedder: &dyn Embedder<T>, view: &TextView) -> Result<Index<T>, RetrievalError> {
    let chunks: Vec<Result<Vec<IndexEntry<T>>, RetrievalError>> = corpus
        .par_chunks(EMBED_CHUNK)
        .map(|chunk| {
            let texts: Vec<String> = chunk.iter().map(|t| view.text(t)).collect();
            let vectors = match embedder.embed_batch(&texts) {
                Ok(v) => v,
                Err(_) => texts
                    .iter()
                    .zip(chunk)
                    .map(|(s, t)| {
                        embedder
                            .embed(s)
                            .map_err(|e| EmbedError::Item { id: t.id().to_string(), message: e.to_string() })
                    })
                    .collect::<Result<_, _>>()?,
            };
            Ok(chunk
                .iter()
                .zip(vectors)
                .map(|(t, vector)| IndexEntry { table_id: t.id().to_string(), vector })
                .collect())
        })
        .collect();
    let mut entries = Vec::with_capacity(corpus.len());
    for c in chunks {
        entries.extend(c?);
    }
    Index::new(entries)
}

/// Ranked candidates for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult<T> {
    pub query_id: String,
    pub ranked: Vec<(String, T)>,
}

impl<T: Scalar> QueryResult<T> {
    pub fn ids(&self) -> Vec<&str> {
        self.ranked.iter().map(|(id, _)| id.as_str()).collect()
    }
}

/// Score descending, then id ascending.
pub(crate) fn rank_order<T: Scalar>(a: (&str, T), b: (&str, T)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0))
}

/// Best `k` (id, score) pairs among `scores`, skipping `exclude`.
pub(crate) fn select_top<T: Scalar>(ids: impl Iterator<Item = (usize, T)>, id_of: impl Fn(usize) -> String, k: usize, exclude: Option<usize>) -> Vec<(String, T)> {
    let mut cands: Vec<(usize, T)> = ids.filter(|(i, _)| Some(*i) != exclude).collect();
    let cmp = |a: &(usize, T), b: &(usize, T)| rank_order((&id_of(a.0), a.1), (&id_of(b.0), b.1));
    if k < cands.len() {
        cands.select_nth_unstable_by(k, cmp);
        cands.truncate(k);
    }
    cands.sort_by(cmp);
    cands.into_iter().map(|(i, s)| (id_of(i), s)).collect()
}

/// Exact cosine top-k, ties broken by ascending id, `exclude_id` left out.
pub fn top_k<T: Scalar>(index: &Index<T>, query: &Embedding<T>, k: usize, exclude_id: Option<&str>) -> QueryResult<T> {
    let q = query.as_slice();
    let scores = index.entries.iter().enumerate().map(|(i, e)| (i, cosine_slices(q, e.vector.as_slice())));
    let exclude = exclude_id.and_then(|id| index.position(id));
    QueryResult {
        query_id: exclude_id.unwrap_or_default().to_string(),
        ranked: select_top(scores, |i| index.entries[i].table_id.clone(), k, exclude),
    }
}

/// Two aligned indexes scored as `w * structural + (1 - w) * text`.
#[derive(Debug, Clone)]
pub struct FusedIndex<T> {
    pub structural: Index<T>,
    pub text: Index<T>,
    pub weight: T,
}

impl<T: Scalar> FusedIndex<T> {
    pub fn new(structural: Index<T>, text: Index<T>, weight: T) -> Result<Self, RetrievalError> {
        for e in structural.entries() {
            if !text.contains(&e.table_id) {
                return Err(RetrievalError::MissingId(e.table_id.clone()));
            }
        }
        if structural.len() != text.len() {
            return Err(RetrievalError::Ratios("fused indexes differ in size".into()));
        }
        Ok(FusedIndex { structural, text, weight })
    }

    /// Top-k for a query already present in both indexes.
    pub fn top_k(&self, query_id: &str, k: usize) -> Result<QueryResult<T>, RetrievalError> {
        let missing = || RetrievalError::MissingId(query_id.to_string());
        let qs = self.structural.vector(query_id).ok_or_else(missing)?.as_slice();
        let qt = self.text.vector(query_id).ok_or_else(missing)?.as_slice();
        let scores = self.structural.entries.iter().enumerate().map(|(i, e)| {
            let t = self.text.vector(&e.table_id).expect("checked at construction");
            let s = fused_similarity(cosine_slices(qs, e.vector.as_slice()), cosine_slices(qt, t.as_slice()), self.weight);
            (i, s)
        });
        let exclude = self.structural.position(query_id);
        Ok(QueryResult {
            query_id: query_id.to_string(),
            ranked: select_top(scores, |i| self.structural.entries[i].table_id.clone(), k, exclude),
        })
    }
}
