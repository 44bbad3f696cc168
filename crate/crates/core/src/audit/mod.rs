//! Transitive label-leakage audit and repair, inter-annotator agreement and
//! similarity-score distributions.

mod distribution;
mod kappa;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;

pub use distribution::{quantile, similarity_distribution, DistributionSummary, PairScore, SimilarityDistribution};
pub use kappa::cohen_kappa;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("self-pair on `{0}`")]
    SelfPair(String),
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no labels")]
    Empty,
    #[error("invalid ratio {0}")]
    Ratio(f64),
    #[error(transparent)]
    Embed(#[from] crate::embedding::EmbedError),
}

/// Unordered similar pairs, stored as `(min, max)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pairs: BTreeSet<(String, String)>,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, AuditError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut set = PairSet::new();
        for (a, b) in pairs {
            set.insert(a, b)?;
        }
        Ok(set)
    }

    /// Returns whether the pair was new.
    pub fn insert(&mut self, a: impl Into<String>, b: impl Into<String>) -> Result<bool, AuditError> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(AuditError::SelfPair(a));
        }
        Ok(self.pairs.insert(if a < b { (a, b) } else { (b, a) }))
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.pairs.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    fn adjacency(&self) -> HashMap<&str, Vec<&str>> {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for (a, b) in self.iter() {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        adj
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Component label of every id in the pair graph. Labels number components
/// by their smallest id, so they do not depend on input order.
pub fn pair_graph_components(p: &PairSet) -> BTreeMap<String, usize> {
    let ids: BTreeSet<&str> = p.iter().flat_map(|(a, b)| [a, b]).collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in p.iter() {
        uf.union(pos[a], pos[b]);
    }
    let mut label: HashMap<usize, usize> = HashMap::new();
    ids.iter()
        .enumerate()
        .map(|(i, &id)| {
            let root = uf.find(i);
            let next = label.len();
            (id.to_string(), *label.entry(root).or_insert(next))
        })
        .collect()
}

/// Witness chains reported per audit.
const MAX_WITNESSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub n_test_pairs: usize,
    /// Test pairs whose ends are connected in the train graph.
    pub n_leaked: usize,
    pub fraction: f64,
    /// Test pairs inferable from a train path of at most two pairs.
    pub n_leaked_chain2: usize,
    pub fraction_chain2: f64,
    /// Shortest train paths for the first few leaked pairs.
    pub witnesses: Vec<Vec<String>>,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn shortest_path(adj: &HashMap<&str, Vec<&str>>, from: &str, to: &str) -> Option<Vec<String>> {
    let mut prev: HashMap<&str, &str> = HashMap::new();
    let mut queue = VecDeque::from([*adj.get_key_value(from)?.0]);
    prev.insert(from, from);
    while let Some(x) = queue.pop_front() {
        if x == to {
            let mut path = vec![to.to_string()];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur.to_string());
            }
            path.reverse();
            return Some(path);
        }
        for &y in &adj[x] {
            if !prev.contains_key(y) {
                prev.insert(y, x);
                queue.push_back(y);
            }
        }
    }
    None
}

/// Counts test pairs that the train pairs already imply by transitivity.
pub fn transitive_leakage(train: &PairSet, test: &PairSet) -> LeakageReport {
    let comp = pair_graph_components(train);
    let adj = train.adjacency();
    let neighbours = |x: &str| -> BTreeSet<&str> { adj.get(x).map(|v| v.iter().copied().collect()).unwrap_or_default() };
    let (mut n_leaked, mut n_chain2) = (0, 0);
    let mut witnesses = Vec::new();
    for (x, y) in test.iter() {
        let connected = matches!((comp.get(x), comp.get(y)), (Some(a), Some(b)) if a == b);
        if !connected {
            continue;
        }
        n_leaked += 1;
        if train.contains(x, y) || !neighbours(x).is_disjoint(&neighbours(y)) {
            n_chain2 += 1;
        }
        if witnesses.len() < MAX_WITNESSES {
            witnesses.extend(shortest_path(&adj, x, y));
        }
    }
    LeakageReport {
        n_test_pairs: test.len(),
        n_leaked,
        fraction: ratio(n_leaked, test.len()),
        n_leaked_chain2: n_chain2,
        fraction_chain2: ratio(n_chain2, test.len()),
        witnesses,
    }
}

/// Splits pairs into train and test by whole connected components, so the
/// result has no transitive leakage. Components are shuffled by `seed`,
/// ordered largest first, and each goes to whichever side is further below
/// its target share of pairs.
pub fn leakage_free_split(p: &PairSet, train_fraction: f64, seed: u64) -> Result<(PairSet, PairSet), AuditError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(AuditError::Ratio(train_fraction));
    }
    let comp = pair_graph_components(p);
    let n_comp = comp.values().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<(&str, &str)>> = vec![Vec::new(); n_comp];
    for (a, b) in p.iter() {
        members[comp[a]].push((a, b));
    }
    members.shuffle(&mut seed::rng(seed));
    members.sort_by_key(|m| std::cmp::Reverse(m.len()));
    let total = p.len() as f64;
    let targets = [train_fraction * total, (1.0 - train_fraction) * total];
    let mut filled = [0usize; 2];
    let (mut train, mut test) = (PairSet::new(), PairSet::new());
    for group in members {
        let fill = |i: usize| if targets[i] > 0.0 { filled[i] as f64 / targets[i] } else { f64::INFINITY };
        let side = if fill(0) <= fill(1) { 0 } else { 1 };
        filled[side] += group.len();
        let dest = if side == 0 { &mut train } else { &mut test };
        for (a, b) in group {
            dest.insert(a, b)?;
        }
    }
    debug_assert_eq!(transitive_leakage(&train, &test).n_leaked, 0);
    Ok((train, test))
}
