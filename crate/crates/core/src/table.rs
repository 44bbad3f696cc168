//! Canonical table representation, the JSONL table file format and
//! column-kind inference.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TableError {
    #[error("malformed table record: field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("table `{id}`: {message}")]
    Structure { id: String, message: String },
    #[error("duplicate table id `{0}` in corpus")]
    DuplicateId(String),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<TableError>,
    },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for TableError {
    fn from(e: std::io::Error) -> Self {
        TableError::Io(e.to_string())
    }
}

/// A table: title, description, column names and text cells.
///
/// Construct through [`Table::new`]; every instance satisfies the width
/// invariant (each row has one cell per column) and has a non-empty id and
/// at least one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    id: String,
    title: String,
    description: String,
    column_names: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        description: impl Into<String>,
        column_names: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let t = Table {
            id: id.into(),
            title: title.into(),
            description: description.into(),
            column_names,
            rows,
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), TableError> {
        let fail = |message: String| TableError::Structure { id: self.id.clone(), message };
        if self.id.is_empty() {
            return Err(fail("empty id".into()));
        }
        if self.column_names.is_empty() {
            return Err(fail("no columns".into()));
        }
        let width = self.column_names.len();
        if let Some((i, row)) = self.rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(fail(format!("row {i} has {} cells, expected {width}", row.len())));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Cells of column `j`, top to bottom.
    pub fn column(&self, j: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[j].as_str())
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Result<Self, TableError> {
        self.id = id.into();
        self.check()?;
        Ok(self)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

/// Column kind, decided from cell contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Numerical,
    Textual,
}

/// Rule deciding when a column counts as numerical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindRule {
    /// Minimum fraction of non-empty cells that must parse as numbers.
    pub numeric_fraction: f64,
}

impl Default for KindRule {
    fn default() -> Self {
        KindRule { numeric_fraction: 0.9 }
    }
}

/// Parses a cell as a decimal or integer number, ignoring thousands
/// separators and surrounding whitespace.
pub fn parse_number(cell: &str) -> Option<f64> {
    let s: String = cell.trim().chars().filter(|&c| c != ',').collect();
    if !s.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn infer_column_kinds(t: &Table) -> Vec<ColumnKind> {
    infer_column_kinds_with(t, KindRule::default())
}

pub fn infer_column_kinds_with(t: &Table, rule: KindRule) -> Vec<ColumnKind> {
    (0..t.n_columns())
        .map(|j| {
            let (mut filled, mut numeric) = (0usize, 0usize);
            for cell in t.column(j) {
                if cell.trim().is_empty() {
                    continue;
                }
                filled += 1;
                if parse_number(cell).is_some() {
                    numeric += 1;
                }
            }
            // integer comparison avoids 0.9 * 10 rounding below 9
            let needed = (rule.numeric_fraction * filled as f64 - 1e-9).ceil() as usize;
            if filled > 0 && numeric >= needed {
                ColumnKind::Numerical
            } else {
                ColumnKind::Textual
            }
        })
        .collect()
}

pub fn is_numerical_table(t: &Table) -> bool {
    infer_column_kinds(t).contains(&ColumnKind::Numerical)
}

/// Where a corpus record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Anchor,
    Generated,
    Background,
}

/// A table plus its origin. Generated records name the plan that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub table: Table,
    pub source: Source,
    pub provenance: Option<String>,
}

impl CorpusRecord {
    pub fn anchor(table: Table) -> Self {
        CorpusRecord { table, source: Source::Anchor, provenance: None }
    }

    pub fn background(table: Table) -> Self {
        CorpusRecord { table, source: Source::Background, provenance: None }
    }

    pub fn generated(table: Table, plan: impl Into<String>) -> Self {
        CorpusRecord { table, source: Source::Generated, provenance: Some(plan.into()) }
    }
}

fn field_err(field: &str, message: impl fmt::Display) -> TableError {
    TableError::Parse { field: field.to_string(), message: message.to_string() }
}

fn string_field(obj: &Map<String, Value>, field: &str, required: bool) -> Result<String, TableError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Null) | None if !required => Ok(String::new()),
        None => Err(field_err(field, "missing")),
        Some(other) => Err(field_err(field, format!("expected string, found {}", kind_name(other)))),
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Cell text for a scalar JSON value. Numbers keep their JSON spelling.
pub(crate) fn cell_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null => Some(String::new()),
        Value::Array(_) | Value::Object(_) => None,
    }
}

pub(crate) fn string_list(v: &Value, field: &str) -> Result<Vec<String>, TableError> {
    let arr = v.as_array().ok_or_else(|| field_err(field, format!("expected array, found {}", kind_name(v))))?;
    arr.iter()
        .enumerate()
        .map(|(i, c)| cell_text(c).ok_or_else(|| field_err(&format!("{field}[{i}]"), "expected scalar")))
        .collect()
}

pub(crate) fn row_list(v: &Value, field: &str) -> Result<Vec<Vec<String>>, TableError> {
    let arr = v.as_array().ok_or_else(|| field_err(field, format!("expected array, found {}", kind_name(v))))?;
    arr.iter()
        .enumerate()
        .map(|(i, row)| string_list(row, &format!("{field}[{i}]")))
        .collect()
}

/// Parses one JSONL table record.
///
/// `id`, `title`, `column_names` and `rows` are required; a missing
/// `description` becomes the empty string. Unknown keys are ignored.
pub fn parse_table(raw: &str) -> Result<Table, TableError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| field_err("<record>", e))?;
    table_from_value(&value)
}

pub fn table_from_value(value: &Value) -> Result<Table, TableError> {
    let obj = value
        .as_object()
        .ok_or_else(|| field_err("<record>", format!("expected object, found {}", kind_name(value))))?;
    let id = string_field(obj, "id", true)?;
    let title = string_field(obj, "title", true)?;
    let description = string_field(obj, "description", false)?;
    let column_names = string_list(obj.get("column_names").ok_or_else(|| field_err("column_names", "missing"))?, "column_names")?;
    let rows = row_list(obj.get("rows").ok_or_else(|| field_err("rows", "missing"))?, "rows")?;
    Table::new(id, title, description, column_names, rows)
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    title: &'a str,
    description: &'a str,
    column_names: &'a [String],
    rows: &'a [Vec<String>],
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<&'a str>,
}

/// One-line JSON form of a table (no trailing newline).
pub fn write_table(t: &Table) -> String {
    record_line(t, None, None)
}

fn record_line(t: &Table, source: Option<Source>, provenance: Option<&str>) -> String {
    let rec = RecordOut {
        id: &t.id,
        title: &t.title,
        description: &t.description,
        column_names: &t.column_names,
        rows: &t.rows,
        source,
        provenance,
    };
    serde_json::to_string(&rec).expect("table serializes")
}

pub fn write_record(r: &CorpusRecord) -> String {
    record_line(&r.table, Some(r.source), r.provenance.as_deref())
}

pub fn parse_record(raw: &str) -> Result<CorpusRecord, TableError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| field_err("<record>", e))?;
    let table = table_from_value(&value)?;
    let source = match value.get("source") {
        None | Some(Value::Null) => Source::Anchor,
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| field_err("source", e))?,
    };
    let provenance = match value.get("provenance") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => return Err(field_err("provenance", format!("expected string, found {}", kind_name(v)))),
    };
    if (source == Source::Generated) != provenance.is_some() {
        return Err(field_err("provenance", "generated records need provenance, others must not carry it"));
    }
    Ok(CorpusRecord { table, source, provenance })
}

/// Reads a JSONL corpus, rejecting duplicate ids. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, TableError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line).map_err(|e| TableError::Line { line: i + 1, source: Box::new(e) })?;
        if !seen.insert(rec.table.id.clone()) {
            return Err(TableError::DuplicateId(rec.table.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_tables<R: BufRead>(reader: R) -> Result<Vec<Table>, TableError> {
    Ok(read_corpus(reader)?.into_iter().map(|r| r.table).collect())
}

pub fn write_corpus<W: Write>(mut w: W, records: &[CorpusRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", write_record(r))?;
    }
    Ok(())
}

pub fn write_tables<W: Write>(mut w: W, tables: &[Table]) -> std::io::Result<()> {
    for t in tables {
        writeln!(w, "{}", write_table(t))?;
    }
    Ok(())
}
