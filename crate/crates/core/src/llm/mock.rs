//! Rule-based stand-in for a chat model.
//!
//! Recognizes the operation and description prompts and answers with a
//! fixed, easily checked transformation of the table embedded in the
//! prompt:
//!
//! - concatenation appends `synthetic_note` with cells `gen-<row>`
//! - edit appends `<first text column>_upper` holding the uppercased source
//! - calculation appends `<first numeric column>_x2` holding doubled values
//! - update prefixes the title with `Updated: `, rewrites the description
//!   with [`describe_template`] and suffixes every column name with `_v2`

use serde::Serialize;

use super::{extract_json_object, prompts, ChatProvider, ChatRequest, LlmError};
use crate::ops::OperationKind;
use crate::serialize::parse_llm_json;
use crate::table::{infer_column_kinds, parse_number, ColumnKind, Table};

/// Deterministic mock. Output is a pure function of the seed and request.
#[derive(Debug, Clone, Copy)]
pub struct MockChat {
    seed: u64,
}

impl MockChat {
    pub fn new(seed: u64) -> Self {
        MockChat { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `Table about <title> with columns <c1>, <c2>.`; the title clause is
/// dropped when the title is empty.
pub fn describe_template(title: &str, columns: &[String]) -> String {
    let title = title.trim();
    if title.is_empty() {
        format!("Table with columns {}.", columns.join(", "))
    } else {
        format!("Table about {} with columns {}.", title, columns.join(", "))
    }
}

fn format_double(v: f64) -> String {
    let d = v * 2.0;
    if d.fract() == 0.0 && d.abs() < 1e15 {
        format!("{}", d as i64)
    } else {
        format!("{d}")
    }
}

#[derive(Serialize)]
struct Out<'a> {
    cell_data: &'a [Vec<String>],
    description: &'a str,
    title: &'a str,
    column_names: &'a [String],
}

fn with_column(t: &Table, name: String, cells: Vec<String>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut cols = t.column_names().to_vec();
    cols.push(name);
    let rows = t
        .rows()
        .iter()
        .zip(cells)
        .map(|(r, c)| {
            let mut r = r.clone();
            r.push(c);
            r
        })
        .collect();
    (cols, rows)
}

fn first_of_kind(t: &Table, kind: ColumnKind) -> usize {
    infer_column_kinds(t).iter().position(|&k| k == kind).unwrap_or(0)
}

pub(crate) fn apply_rule(t: &Table, op: OperationKind) -> String {
    let mut title = t.title().to_string();
    let mut description = t.description().to_string();
    let (cols, rows) = match op {
        OperationKind::Concatenation => {
            let cells = (0..t.n_rows()).map(|i| format!("gen-{i}")).collect();
            with_column(t, "synthetic_note".into(), cells)
        }
        OperationKind::Edit => {
            let j = first_of_kind(t, ColumnKind::Textual);
            let cells = t.column(j).map(str::to_uppercase).collect();
            with_column(t, format!("{}_upper", t.column_names()[j]), cells)
        }
        OperationKind::Calculation => {
            let j = first_of_kind(t, ColumnKind::Numerical);
            let cells = t.column(j).map(|c| parse_number(c).map(format_double).unwrap_or_default()).collect();
            with_column(t, format!("{}_x2", t.column_names()[j]), cells)
        }
        OperationKind::Update => {
            title = format!("Updated: {}", t.title());
            let cols: Vec<String> = t.column_names().iter().map(|c| format!("{c}_v2")).collect();
            description = describe_template(&title, &cols);
            (cols, t.rows().to_vec())
        }
        OperationKind::Removal | OperationKind::Reordering => (t.column_names().to_vec(), t.rows().to_vec()),
    };
    let out = Out { cell_data: &rows, description: &description, title: &title, column_names: &cols };
    serde_json::to_string(&out).expect("mock output serializes")
}

impl ChatProvider for MockChat {
    fn chat(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let prompt = &req.user_prompt;
        let table = extract_json_object(prompt).ok().and_then(|j| parse_llm_json(j, "mock").ok());
        let Some(table) = table else {
            return Ok("{}".to_string());
        };
        if let Some(op) = prompts::detect_operation(prompt) {
            return Ok(apply_rule(&table, op));
        }
        if prompt.contains(prompts::DESCRIPTION_MARKER) {
            return Ok(describe_template(table.title(), table.column_names()));
        }
        Ok("{}".to_string())
    }
}
