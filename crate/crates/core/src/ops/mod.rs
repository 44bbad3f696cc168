//! Analyst-style table transformations: eligibility, plan sampling,
//! application and structural validation.

mod apply;
mod pipeline;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::table::{is_numerical_table, Table};

pub use apply::{apply_llm_op, apply_op, apply_removal, apply_reordering, OpRejection};
pub use pipeline::{
    generate, run_pipeline, GenerationConfig, GenerationOutput, GenerationResult, OpOutcome, OpStatus, PairRecord,
};
pub use validate::validate_transformed;

/// The six transformations. The derived order is the application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationKind {
    Removal,
    Concatenation,
    Edit,
    Calculation,
    Reordering,
    Update,
}

impl OperationKind {
    pub const ALL: [OperationKind; 6] = [
        OperationKind::Removal,
        OperationKind::Concatenation,
        OperationKind::Edit,
        OperationKind::Calculation,
        OperationKind::Reordering,
        OperationKind::Update,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperationKind::Removal => "removal",
            OperationKind::Concatenation => "concatenation",
            OperationKind::Edit => "edit",
            OperationKind::Calculation => "calculation",
            OperationKind::Reordering => "reordering",
            OperationKind::Update => "update",
        }
    }

    /// Whether a chat model performs this operation.
    pub fn needs_llm(self) -> bool {
        !matches!(self, OperationKind::Removal | OperationKind::Reordering)
    }

    pub fn ordinal(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A non-empty set of operations plus the seed driving their randomness.
/// Iteration always follows the fixed application order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperationPlan {
    pub ops: BTreeSet<OperationKind>,
    pub seed: u64,
}

impl OperationPlan {
    pub fn ops(&self) -> impl Iterator<Item = OperationKind> + '_ {
        self.ops.iter().copied()
    }

    /// `removal+update` style identifier.
    pub fn id(&self) -> String {
        self.ops().map(OperationKind::name).collect::<Vec<_>>().join("+")
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ops().map(OperationKind::name).collect()
    }
}

/// Operations allowed on `t`.
///
/// Concatenation, reordering and update always apply. Tables with a
/// numerical column get calculation; tables without one get edit, and
/// removal when they have at least three columns.
pub fn eligible_ops(t: &Table) -> BTreeSet<OperationKind> {
    use OperationKind::*;
    let mut ops: BTreeSet<_> = [Concatenation, Reordering, Update].into_iter().collect();
    if is_numerical_table(t) {
        ops.insert(Calculation);
    } else {
        ops.insert(Edit);
        if t.n_columns() >= 3 {
            ops.insert(Removal);
        }
    }
    ops
}

const PLAN_ATTEMPTS: usize = 8;

/// Includes each eligible operation independently with probability 1/2,
/// resampling empty draws up to eight times before falling back to
/// `{update}`.
pub fn sample_plan(t: &Table, rng_seed: u64) -> OperationPlan {
    let eligible = eligible_ops(t);
    let mut rng = seed::rng(rng_seed);
    for _ in 0..PLAN_ATTEMPTS {
        let ops: BTreeSet<_> = eligible.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        if !ops.is_empty() {
            return OperationPlan { ops, seed: rng_seed };
        }
    }
    OperationPlan { ops: [OperationKind::Update].into_iter().collect(), seed: rng_seed }
}
