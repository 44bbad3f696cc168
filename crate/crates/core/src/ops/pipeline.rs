use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_op, sample_plan, OperationKind, OperationPlan};
use crate::llm::ChatProvider;
use crate::seed;
use crate::table::{write_record, CorpusRecord, Table};

/// Duplicate plans tolerated before giving up on reaching `n_targets`.
const DUPLICATE_BUDGET: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpOutcome {
    pub op: OperationKind,
    pub status: OpStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

/// One attempted generation from an anchor.
///
/// `trace` holds the anchor followed by the output of every accepted
/// operation, so the chain can be re-validated later. `target` is present
/// only when every operation was accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub anchor_id: String,
    pub target: Option<Table>,
    pub plan: OperationPlan,
    pub outcomes: Vec<OpOutcome>,
    pub trace: Vec<Table>,
}

/// Id given to the `index`-th target of an anchor.
pub fn target_id(anchor_id: &str, index: usize) -> String {
    format!("{anchor_id}~gen{index}")
}

/// Samples up to `n_targets` distinct plans for `anchor` and applies each
/// one in the fixed operation order, every step consuming the previous
/// output.
pub fn run_pipeline(provider: &dyn ChatProvider, anchor: &Table, n_targets: usize, seed: u64) -> Vec<GenerationResult> {
    let mut plans: Vec<OperationPlan> = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0;
    let mut draw = 0u64;
    while plans.len() < n_targets.max(1) && duplicates <= DUPLICATE_BUDGET {
        let plan = sample_plan(anchor, seed::derive(seed, draw));
        draw += 1;
        if seen.insert(plan.ops.clone()) {
            plans.push(plan);
        } else {
            duplicates += 1;
        }
    }
    plans
        .into_iter()
        .enumerate()
        .map(|(i, plan)| execute_plan(provider, anchor, plan, &target_id(anchor.id(), i)))
        .collect()
}

fn execute_plan(provider: &dyn ChatProvider, anchor: &Table, plan: OperationPlan, target_id: &str) -> GenerationResult {
    let mut trace = vec![anchor.clone()];
    let mut outcomes = Vec::new();
    let mut failed = false;
    for op in plan.ops() {
        let current = trace.last().expect("trace starts with the anchor");
        match apply_op(provider, current, op, seed::derive(plan.seed, op.ordinal())) {
            Ok(next) => {
                outcomes.push(OpOutcome { op, status: OpStatus::Accepted, reason: None });
                trace.push(next);
            }
            Err(rej) => {
                outcomes.push(OpOutcome { op, status: OpStatus::Rejected, reason: Some(rej.reason) });
                failed = true;
                break;
            }
        }
    }
    let target = if failed {
        None
    } else {
        let last = trace.last().expect("non-empty").clone();
        Some(last.with_id(target_id).expect("target id is non-empty"))
    };
    GenerationResult { anchor_id: anchor.id().to_string(), target, plan, outcomes, trace }
}

/// Line of the pairs file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub anchor_id: String,
    pub target_id: String,
    pub relation: String,
    pub plan: Vec<OperationKind>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub n_targets: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { n_targets: 2, seed: 0, workers: 1 }
    }
}

/// Results of a corpus-wide run, ordered by anchor id then plan index.
#[derive(Debug, Clone)]
pub struct GenerationOutput {
    pub results: Vec<GenerationResult>,
}

#[derive(Serialize)]
struct LogLine<'a> {
    anchor_id: &'a str,
    target_id: Option<&'a str>,
    plan: Vec<OperationKind>,
    seed: u64,
    outcomes: &'a [OpOutcome],
}

impl GenerationOutput {
    pub fn pairs(&self) -> Vec<PairRecord> {
        self.results
            .iter()
            .filter_map(|r| {
                r.target.as_ref().map(|t| PairRecord {
                    anchor_id: r.anchor_id.clone(),
                    target_id: t.id().to_string(),
                    relation: "similar".into(),
                    plan: r.plan.ops().collect(),
                    seed: r.plan.seed,
                })
            })
            .collect()
    }

    pub fn targets(&self) -> Vec<CorpusRecord> {
        self.results
            .iter()
            .filter_map(|r| r.target.as_ref().map(|t| CorpusRecord::generated(t.clone(), r.plan.id())))
            .collect()
    }

    pub fn n_rejected(&self) -> usize {
        self.results.iter().filter(|r| r.target.is_none()).count()
    }

    pub fn write_pairs<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in self.pairs() {
            writeln!(w, "{}", serde_json::to_string(&p).expect("pair serializes"))?;
        }
        Ok(())
    }

    pub fn write_targets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in self.targets() {
            writeln!(w, "{}", write_record(&r))?;
        }
        Ok(())
    }

    /// One line per attempted generation, including rejection reasons.
    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.results {
            let line = LogLine {
                anchor_id: &r.anchor_id,
                target_id: r.target.as_ref().map(|t| t.id()),
                plan: r.plan.ops().collect(),
                seed: r.plan.seed,
                outcomes: &r.outcomes,
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("log serializes"))?;
        }
        Ok(())
    }
}

/// Runs the pipeline over every anchor on a bounded worker pool. Anchor
/// seeds derive from the run seed and the anchor id, so output does not
/// depend on the worker count.
pub fn generate(provider: &dyn ChatProvider, anchors: &[Table], cfg: &GenerationConfig) -> GenerationOutput {
    let work = |a: &Table| run_pipeline(provider, a, cfg.n_targets, seed::derive_str(cfg.seed, a.id()));
    let mut per_anchor: Vec<Vec<GenerationResult>> = if cfg.workers <= 1 {
        anchors.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().expect("thread pool");
        pool.install(|| anchors.par_iter().map(work).collect())
    };
    per_anchor.sort_by(|a, b| a.first().map(|r| &r.anchor_id).cmp(&b.first().map(|r| &r.anchor_id)));
    GenerationOutput { results: per_anchor.into_iter().flatten().collect() }
}
