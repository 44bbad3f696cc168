//! Hard-negative mining: BM25 and dense rankings fused with reciprocal
//! rank fusion, then filtered of the anchor and its positives.

mod bm25;

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::retrieval::{top_k, Index};
use crate::scalar::Scalar;

pub use bm25::{bm25_scores, Bm25Index, Bm25Params};

#[derive(Debug, thiserror::Error)]
pub enum MiningError {
    #[error("anchor `{0}` is missing from the {1} index")]
    MissingAnchor(String, &'static str),
    #[error("pool too small for anchor `{anchor}`: {found} candidates after filtering, {wanted} wanted")]
    PoolTooSmall { anchor: String, found: usize, wanted: usize },
    #[error("invalid mining config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub n_hard: usize,
    pub rrf_k: usize,
    pub bm25: Bm25Params,
    /// Candidates taken from each channel before fusion.
    pub depth: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { n_hard: 15, rrf_k: 60, bm25: Bm25Params::default(), depth: 200 }
    }
}

/// Reciprocal rank fusion: `Σ 1 / (rrf_k + rank)` over the rankings that
/// contain an id (ranks from 1). Sorted by score, ties by ascending id.
pub fn rrf_fuse<S: AsRef<str>>(rankings: &[Vec<S>], rrf_k: usize) -> Vec<(String, f64)> {
    let mut scores: HashMap<&str, f64> = HashMap::new();
    for ranking in rankings {
        for (i, id) in ranking.iter().enumerate() {
            *scores.entry(id.as_ref()).or_default() += 1.0 / (rrf_k + i + 1) as f64;
        }
    }
    let mut fused: Vec<(String, f64)> = scores.into_iter().map(|(id, s)| (id.to_string(), s)).collect();
    fused.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    fused
}

/// The first `cfg.n_hard` fused candidates that are neither the anchor nor
/// one of its positives.
pub fn mine_hard_negatives<T: Scalar>(
    anchor_id: &str,
    positives: &BTreeSet<String>,
    dense: &Index<T>,
    lexical: &Bm25Index,
    cfg: &MiningConfig,
) -> Result<Vec<String>, MiningError> {
    if cfg.n_hard == 0 {
        return Err(MiningError::Config("n_hard must be at least 1".into()));
    }
    let q = dense.vector(anchor_id).ok_or_else(|| MiningError::MissingAnchor(anchor_id.into(), "dense"))?;
    let dense_ranked: Vec<String> = top_k(dense, q, cfg.depth, Some(anchor_id)).ranked.into_iter().map(|(id, _)| id).collect();
    let lex_ranked: Vec<String> = lexical
        .query_doc(anchor_id, cfg.depth, &cfg.bm25)
        .ok_or_else(|| MiningError::MissingAnchor(anchor_id.into(), "lexical"))?
        .into_iter()
        .map(|(id, _)| id.to_string())
        .collect();
    let out: Vec<String> = rrf_fuse(&[dense_ranked, lex_ranked], cfg.rrf_k)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| id != anchor_id && !positives.contains(id))
        .take(cfg.n_hard)
        .collect();
    if out.len() < cfg.n_hard {
        return Err(MiningError::PoolTooSmall { anchor: anchor_id.into(), found: out.len(), wanted: cfg.n_hard });
    }
    Ok(out)
}

/// Line of the negatives file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeRecord {
    pub anchor_id: String,
    pub positive_ids: Vec<String>,
    pub negative_ids: Vec<String>,
}

/// Mines every anchor in parallel; output follows the input order.
pub fn mine_all<T: Scalar>(
    anchors: &[(String, BTreeSet<String>)],
    dense: &Index<T>,
    lexical: &Bm25Index,
    cfg: &MiningConfig,
) -> Result<Vec<NegativeRecord>, MiningError> {
    anchors
        .par_iter()
        .map(|(a, pos)| {
            Ok(NegativeRecord {
                anchor_id: a.clone(),
                positive_ids: pos.iter().cloned().collect(),
                negative_ids: mine_hard_negatives(a, pos, dense, lexical, cfg)?,
            })
        })
        .collect()
}

pub fn write_negatives<W: Write>(records: &[NegativeRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    Ok(())
}

pub fn read_negatives(text: &str) -> Result<Vec<NegativeRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;
    use crate::retrieval::IndexEntry;
    use rand::Rng;

    #[test]
    fn rrf_hand_values() {
        let fused = rrf_fuse(&[vec!["a", "b"], vec!["a", "c"]], 60);
        assert_eq!(fused[0].0, "a");
        assert!((fused[0].1 - 2.0 / 61.0).abs() < 1e-15);
        assert!((fused[0].1 - 0.032787).abs() < 1e-6);
        // b and c tie at 1/62; id breaks it
        assert_eq!(fused[1].0, "b");
        assert_eq!(fused[2].0, "c");
        assert!(fused.iter().all(|(id, _)| id != "z"));
    }

    #[test]
    fn rrf_single_ranking_is_identity_and_order_invariant() {
        let one = vec![vec!["q", "b", "z", "a"]];
        let ids: Vec<String> = rrf_fuse(&one, 60).into_iter().map(|(id, _)| id).collect();
        assert_eq!(ids, ["q", "b", "z", "a"]);
        let r1 = vec!["a", "b", "c", "d"];
        let r2 = vec!["d", "c", "e"];
        let r3 = vec!["e", "a"];
        assert_eq!(rrf_fuse(&[r1.clone(), r2.clone(), r3.clone()], 60), rrf_fuse(&[r3, r1, r2], 60));
    }

    fn toy_pool(n: usize, seed: u64) -> (Index<f64>, Bm25Index) {
        let (dense, docs) = toy_docs(n, seed);
        (dense, Bm25Index::from_texts(docs))
    }

    fn toy_docs(n: usize, seed: u64) -> (Index<f64>, Vec<(String, String)>) {
        let mut rng = crate::seed::rng(seed);
        let words = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa", "lambda", "mu"];
        let mut entries = Vec::new();
        let mut docs = Vec::new();
        for i in 0..n {
            let id = format!("t{i:03}");
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            entries.push(IndexEntry { table_id: id.clone(), vector: Embedding::from_raw(v) });
            let text: Vec<&str> = (0..rng.random_range(3..9)).map(|_| words[rng.random_range(0..words.len())]).collect();
            docs.push((id, text.join(" ")));
        }
        (Index::new(entries).unwrap(), docs)
    }

    #[test]
    fn matches_fuse_then_filter_oracle() {
        let (dense, docs) = toy_docs(100, 4);
        let lex = Bm25Index::from_texts(docs.clone());
        let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| t.split(' ').map(String::from).collect()).collect();
        let cfg = MiningConfig::default();
        for a in 0..20 {
            let anchor = format!("t{a:03}");
            let positives: BTreeSet<String> = [format!("t{:03}", (a + 1) % 100), format!("t{:03}", (a + 7) % 100)].into();
            let got = mine_hard_negatives(&anchor, &positives, &dense, &lex, &cfg).unwrap();

            // oracle: full brute-force rankings, then fuse by hand
            let q = dense.vector(&anchor).unwrap().as_slice();
            let cos = |v: &[f64]| {
                let d: f64 = q.iter().zip(v).map(|(x, y)| x * y).sum();
                d / (q.iter().map(|x| x * x).sum::<f64>().sqrt() * v.iter().map(|x| x * x).sum::<f64>().sqrt())
            };
            let mut dr: Vec<(String, f64)> = dense.entries().iter().filter(|e| e.table_id != anchor).map(|e| (e.table_id.clone(), cos(e.vector.as_slice()))).collect();
            dr.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            let mut lex_all: Vec<(String, f64)> = bm25_scores(&tokens[a], &tokens, &cfg.bm25)
                .into_iter()
                .filter(|&(i, s)| i != a && s > 0.0)
                .map(|(i, s)| (docs[i].0.clone(), s))
                .collect();
            lex_all.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            let mut score: HashMap<String, f64> = HashMap::new();
            for (r, (id, _)) in dr.iter().enumerate() {
                *score.entry(id.clone()).or_default() += 1.0 / (61 + r) as f64;
            }
            for (r, (id, _)) in lex_all.iter().enumerate() {
                *score.entry(id.clone()).or_default() += 1.0 / (61 + r) as f64;
            }
            let mut fused: Vec<(String, f64)> = score.into_iter().collect();
            fused.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            let want: Vec<String> = fused.into_iter().map(|(id, _)| id).filter(|id| *id != anchor && !positives.contains(id)).take(15).collect();
            assert_eq!(got, want);
            assert_eq!(got.len(), 15);
            let uniq: BTreeSet<&String> = got.iter().collect();
            assert_eq!(uniq.len(), 15);
        }
    }

    #[test]
    fn small_pool_is_an_error() {
        let (dense, lex) = toy_pool(10, 1);
        let err = mine_hard_negatives("t000", &BTreeSet::new(), &dense, &lex, &MiningConfig::default()).unwrap_err();
        assert!(matches!(err, MiningError::PoolTooSmall { found: 9, wanted: 15, .. }));
    }

    #[test]
    fn negatives_file_roundtrip() {
        let (dense, lex) = toy_pool(40, 2);
        let anchors = vec![("t001".to_string(), BTreeSet::from(["t002".to_string()])), ("t005".into(), BTreeSet::new())];
        let recs = mine_all(&anchors, &dense, &lex, &MiningConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_negatives(&recs, &mut buf).unwrap();
        assert_eq!(read_negatives(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
        assert!(recs[0].negative_ids.iter().all(|id| id != "t001" && id != "t002"));
    }
}
