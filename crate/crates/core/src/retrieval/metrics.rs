use std::collections::HashSet;

use crate::scalar::Scalar;

/// `|top-k ∩ relevant| / |relevant|`; 0 for an empty relevant set.
pub fn recall_at_k<T: Scalar, S: AsRef<str>>(ranked: &[S], relevant: &HashSet<String>, k: usize) -> T {
    if relevant.is_empty() {
        return T::zero();
    }
    let hits = ranked.iter().take(k).filter(|id| relevant.contains(id.as_ref())).count();
    T::of_usize(hits) / T::of_usize(relevant.len())
}

/// Binary-gain nDCG with `1 / log2(rank + 1)` discounts from rank 1.
pub fn ndcg_at_k<T: Scalar, S: AsRef<str>>(ranked: &[S], relevant: &HashSet<String>, k: usize) -> T {
    if relevant.is_empty() || k == 0 {
        return T::zero();
    }
    let discount = |rank: usize| T::one() / T::of_usize(rank + 1).log2();
    let dcg: T = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| relevant.contains(id.as_ref()))
        .fold(T::zero(), |acc, (i, _)| acc + discount(i + 1));
    let ideal = (1..=relevant.len().min(k)).fold(T::zero(), |acc, r| acc + discount(r));
    dcg / ideal
}
