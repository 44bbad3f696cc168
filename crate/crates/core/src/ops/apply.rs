use rand::seq::{index::sample, SliceRandom};
use rand::Rng as _;

use super::{validate_transformed, OperationKind};
use crate::llm::{extract_json_object, prompts, ChatProvider, ChatRequest};
use crate::seed;
use crate::serialize::{parse_llm_json, serialize_llm_json};
use crate::table::Table;

/// An operation whose output was discarded, with the reason.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{op} rejected: {reason}")]
pub struct OpRejection {
    pub op: OperationKind,
    pub reason: String,
}

fn rebuild(t: &Table, cols: &[usize]) -> Table {
    let names = cols.iter().map(|&j| t.column_names()[j].clone()).collect();
    let rows = t.rows().iter().map(|r| cols.iter().map(|&j| r[j].clone()).collect()).collect();
    Table::new(t.id(), t.title(), t.description(), names, rows).expect("projection keeps table invariants")
}

/// Drops one or two random columns, never leaving fewer than two.
/// Surviving columns keep their order.
pub fn apply_removal(t: &Table, seed: u64) -> Table {
    let n = t.n_columns();
    if n < 3 {
        return t.clone();
    }
    let mut rng = seed::rng(seed);
    let max_remove = (n - 2).min(2);
    let k = rng.random_range(1..=max_remove);
    let mut dropped = sample(&mut rng, n, k).into_vec();
    dropped.sort_unstable();
    let keep: Vec<usize> = (0..n).filter(|j| dropped.binary_search(j).is_err()).collect();
    rebuild(t, &keep)
}

/// Applies one uniformly random non-identity permutation to the columns.
pub fn apply_reordering(t: &Table, seed: u64) -> Table {
    let n = t.n_columns();
    if n < 2 {
        return t.clone();
    }
    let mut rng = seed::rng(seed);
    let identity: Vec<usize> = (0..n).collect();
    let mut perm = identity.clone();
    while perm == identity {
        perm.shuffle(&mut rng);
    }
    rebuild(t, &perm)
}

/// Runs one chat-backed operation: wraps the table JSON and the operation's
/// instruction, extracts the returned object and validates it.
pub fn apply_llm_op(provider: &dyn ChatProvider, t: &Table, op: OperationKind, seed: u64) -> Result<Table, OpRejection> {
    let reject = |reason: String| OpRejection { op, reason };
    let instruction = prompts::operation_prompt(op).ok_or_else(|| reject("not a chat operation".into()))?;
    let prompt = prompts::wrap_operation(&serialize_llm_json(t, seed), instruction);
    let completion = provider.chat(&ChatRequest::new(prompt)).map_err(|e| reject(e.to_string()))?;
    let json = extract_json_object(&completion).map_err(|e| reject(e.to_string()))?;
    let after = parse_llm_json(json, t.id()).map_err(|e| reject(format!("unusable table: {e}")))?;
    validate_transformed(t, &after, op).map_err(|v| reject(v.join("; ")))?;
    Ok(after)
}

/// Applies any operation; programmatic ones are also validated so a single
/// code path records outcomes.
pub fn apply_op(provider: &dyn ChatProvider, t: &Table, op: OperationKind, seed: u64) -> Result<Table, OpRejection> {
    let after = match op {
        OperationKind::Removal => apply_removal(t, seed),
        OperationKind::Reordering => apply_reordering(t, seed),
        _ => return apply_llm_op(provider, t, op, seed),
    };
    validate_transformed(t, &after, op).map_err(|v| OpRejection { op, reason: v.join("; ") })?;
    Ok(after)
}
