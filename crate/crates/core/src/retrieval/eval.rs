use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ndcg_at_k, recall_at_k, top_k, Index, QueryResult, RetrievalError};
use crate::scalar::Scalar;

/// A query table (by id, already in the index) and the ids it should retrieve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub relevant: Vec<String>,
}

pub fn metric_key(metric: &str, k: usize) -> String {
    format!("{metric}@{k}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics<T> {
    pub metrics: BTreeMap<String, T>,
    /// 1-based rank of each relevant id within the top max(k), in the
    /// order the relevant ids were given; `None` past that depth.
    pub relevant_ranks: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub ks: Vec<usize>,
    pub n_queries: usize,
    pub aggregates: BTreeMap<String, T>,
    pub per_query: BTreeMap<String, QueryMetrics<T>>,
}

impl<T: Scalar> EvalReport<T> {
    pub fn metric_names(&self) -> Vec<String> {
        self.ks.iter().flat_map(|&k| [metric_key("recall", k), metric_key("ndcg", k)]).collect()
    }

    pub fn aggregate(&self, metric: &str, k: usize) -> Option<T> {
        self.aggregates.get(&metric_key(metric, k)).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per query: `query_id,recall@k,ndcg@k,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let names = self.metric_names();
        let mut header = vec!["query_id".to_string()];
        header.extend(names.iter().cloned());
        out.write_record(&header)?;
        for (id, q) in &self.per_query {
            let mut row = vec![id.clone()];
            row.extend(names.iter().map(|n| q.metrics[n].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scores every query against the index (excluding the query itself).
pub fn evaluate<T: Scalar>(index: &Index<T>, queries: &[Query], ks: &[usize]) -> Result<EvalReport<T>, RetrievalError> {
    evaluate_with(queries, ks, |q, depth| {
        let v = index.vector(&q.id).ok_or_else(|| RetrievalError::MissingId(q.id.clone()))?;
        for r in &q.relevant {
            if !index.contains(r) {
                return Err(RetrievalError::MissingId(r.clone()));
            }
        }
        Ok(top_k(index, v, depth, Some(&q.id)))
    })
}

/// Same as [`evaluate`] with a caller-supplied ranker, called with the
/// query and the depth `max(ks)`.
pub fn evaluate_with<T, F>(queries: &[Query], ks: &[usize], rank: F) -> Result<EvalReport<T>, RetrievalError>
where
    T: Scalar,
    F: Fn(&Query, usize) -> Result<QueryResult<T>, RetrievalError> + Sync,
{
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    ks.retain(|&k| k > 0);
    let depth = ks.last().copied().unwrap_or(0);
    let rows: Vec<(String, QueryMetrics<T>)> = queries
        .par_iter()
        .map(|q| {
            let res = rank(q, depth)?;
            let ranked = res.ids();
            let relevant: HashSet<String> = q.relevant.iter().cloned().collect();
            let mut metrics = BTreeMap::new();
            for &k in &ks {
                metrics.insert(metric_key("recall", k), recall_at_k(&ranked, &relevant, k));
                metrics.insert(metric_key("ndcg", k), ndcg_at_k(&ranked, &relevant, k));
            }
            let relevant_ranks = q.relevant.iter().map(|r| ranked.iter().position(|id| id == r).map(|p| p + 1)).collect();
            Ok((q.id.clone(), QueryMetrics { metrics, relevant_ranks }))
        })
        .collect::<Result<_, RetrievalError>>()?;
    let per_query: BTreeMap<_, _> = rows.into_iter().collect();
    let mut aggregates = BTreeMap::new();
    if !per_query.is_empty() {
        let n = T::of_usize(per_query.len());
        for &k in &ks {
            for m in ["recall", "ndcg"] {
                let key = metric_key(m, k);
                // summed in query-id order so the mean is reproducible
                let total: T = per_query.values().map(|q| q.metrics[&key]).sum();
                aggregates.insert(key, total / n);
            }
        }
    }
    Ok(EvalReport { ks, n_queries: per_query.len(), aggregates, per_query })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;
    use crate::retrieval::IndexEntry;

    fn idx(vs: &[(&str, [f64; 2])]) -> Index<f64> {
        Index::new(vs.iter().map(|(id, v)| IndexEntry { table_id: id.to_string(), vector: Embedding::from_raw(v.to_vec()) }).collect()).unwrap()
    }

    #[test]
    fn perfect_query_scores_one() {
        let index = idx(&[("q", [1.0, 0.0]), ("t1", [1.0, 0.01]), ("t2", [1.0, 0.02]), ("x", [0.0, 1.0])]);
        let r = evaluate(&index, &[Query { id: "q".into(), relevant: vec!["t1".into(), "t2".into()] }], &[2, 10]).unwrap();
        assert_eq!(r.aggregates.len(), 4);
        assert!(r.aggregates.values().all(|v| (*v - 1.0).abs() < 1e-12));
        assert_eq!(r.per_query["q"].relevant_ranks, [Some(1), Some(2)]);
    }

    #[test]
    fn missing_relevant_id_is_named() {
        let index = idx(&[("q", [1.0, 0.0]), ("t1", [1.0, 0.0])]);
        let err = evaluate(&index, &[Query { id: "q".into(), relevant: vec!["ghost".into()] }], &[2]).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn aggregates_are_means_and_csv_has_one_row_per_query() {
        let index = idx(&[("a", [1.0, 0.0]), ("b", [0.9, 0.1]), ("c", [0.0, 1.0]), ("d", [0.1, 0.9])]);
        let qs = vec![
            Query { id: "a".into(), relevant: vec!["b".into(), "c".into()] },
            Query { id: "c".into(), relevant: vec!["d".into()] },
            Query { id: "d".into(), relevant: vec!["a".into()] },
        ];
        let r = evaluate(&index, &qs, &[10, 2, 2]).unwrap();
        assert_eq!(r.ks, [2, 10]);
        for key in r.metric_names() {
            let mean = r.per_query.values().map(|q| q.metrics[&key]).sum::<f64>() / 3.0;
            assert!((r.aggregates[&key] - mean).abs() < 1e-15);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("query_id,recall@2,ndcg@2,recall@10,ndcg@10\n"));
        let back: EvalReport<f64> = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
