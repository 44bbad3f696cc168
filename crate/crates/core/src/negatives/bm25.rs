use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::embedding::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

fn idf(n_docs: usize, df: usize) -> f64 {
    (1.0 + (n_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

/// BM25 score of every document for `query`, in document order. Repeated
/// query terms count once per occurrence.
pub fn bm25_scores<S: AsRef<str>>(query: &[S], corpus: &[Vec<S>], params: &Bm25Params) -> Vec<(usize, f64)> {
    let docs: Vec<HashMap<&str, usize>> = corpus
        .iter()
        .map(|d| {
            let mut tf = HashMap::new();
            for t in d {
                *tf.entry(t.as_ref()).or_default() += 1;
            }
            tf
        })
        .collect();
    let lens: Vec<usize> = corpus.iter().map(Vec::len).collect();
    let avg = if lens.is_empty() { 0.0 } else { lens.iter().sum::<usize>() as f64 / lens.len() as f64 };
    (0..corpus.len())
        .map(|i| {
            let s = query
                .iter()
                .map(|q| {
                    let q = q.as_ref();
                    let tf = docs[i].get(q).copied().unwrap_or(0);
                    if tf == 0 {
                        return 0.0;
                    }
                    let df = docs.iter().filter(|d| d.contains_key(q)).count();
                    term_score(tf, lens[i], avg, idf(corpus.len(), df), params)
                })
                .sum();
            (i, s)
        })
        .collect()
}

fn term_score(tf: usize, len: usize, avg_len: f64, idf: f64, p: &Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = if avg_len > 0.0 { len as f64 / avg_len } else { 0.0 };
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm))
}

/// Inverted index over tokenized documents.
#[derive(Debug, Clone, Default)]
pub struct Bm25Index {
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
    doc_terms: Vec<Vec<(u32, u32)>>,
    lens: Vec<usize>,
    avg_len: f64,
    vocab: HashMap<String, u32>,
    postings: Vec<Vec<(u32, u32)>>,
}

impl Bm25Index {
    /// Tokenizes each `(id, text)` the same way as the hashed encoder.
    pub fn from_texts(docs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self::from_tokens(docs.into_iter().map(|(id, text)| (id, tokenize(&text))))
    }

    pub fn from_tokens(docs: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        let mut ix = Bm25Index::default();
        for (id, tokens) in docs {
            let doc = ix.ids.len() as u32;
            let mut tf: HashMap<u32, u32> = HashMap::new();
            for t in &tokens {
                let next = ix.vocab.len() as u32;
                let term = *ix.vocab.entry(t.clone()).or_insert(next);
                if term as usize == ix.postings.len() {
                    ix.postings.push(Vec::new());
                }
                *tf.entry(term).or_default() += 1;
            }
            let mut terms: Vec<(u32, u32)> = tf.into_iter().collect();
            terms.sort_unstable();
            for &(term, count) in &terms {
                ix.postings[term as usize].push((doc, count));
            }
            ix.by_id.insert(id.clone(), doc as usize);
            ix.ids.push(id);
            ix.doc_terms.push(terms);
            ix.lens.push(tokens.len());
        }
        let total: usize = ix.lens.iter().sum();
        ix.avg_len = if ix.lens.is_empty() { 0.0 } else { total as f64 / ix.lens.len() as f64 };
        ix
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn rank(&self, query: &[(u32, u32)], exclude: Option<usize>, depth: usize, p: &Bm25Params) -> Vec<(&str, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for &(term, qtf) in query {
            let posting = &self.postings[term as usize];
            let w = idf(self.ids.len(), posting.len());
            for &(doc, tf) in posting {
                let s = term_score(tf as usize, self.lens[doc as usize], self.avg_len, w, p);
                *acc.entry(doc).or_default() += qtf as f64 * s;
            }
        }
        let mut hits: Vec<(&str, f64)> = acc
            .into_iter()
            .filter(|&(d, s)| Some(d as usize) != exclude && s > 0.0)
            .map(|(d, s)| (self.ids[d as usize].as_str(), s))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        hits.truncate(depth);
        hits
    }

    /// Documents with positive score for free text, best first.
    pub fn query_text(&self, text: &str, depth: usize, p: &Bm25Params) -> Vec<(&str, f64)> {
        let mut tf: HashMap<u32, u32> = HashMap::new();
        for t in tokenize(text) {
            if let Some(&term) = self.vocab.get(&t) {
                *tf.entry(term).or_default() += 1;
            }
        }
        let mut q: Vec<(u32, u32)> = tf.into_iter().collect();
        q.sort_unstable();
        self.rank(&q, None, depth, p)
    }

    /// Uses an indexed document as the query, excluding it from the result.
    pub fn query_doc(&self, id: &str, depth: usize, p: &Bm25Params) -> Option<Vec<(&str, f64)>> {
        let d = *self.by_id.get(id)?;
        Some(self.rank(&self.doc_terms[d], Some(d), depth, p))
    }
}
