//! Table serializers: the JSON string handed to chat models and the flat
//! text handed to text encoders.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::Serialize;
use serde_json::Value;

use crate::seed;
use crate::table::{row_list, string_list, Table, TableError};

/// Default whitespace-token cap applied to encoder inputs.
pub const DEFAULT_TOKEN_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SerializationMode {
    LlmJson,
    #[default]
    EmbeddingText,
    /// Title, description and column names only; no cell content.
    EmbeddingTextBlankCells,
}

/// Key order is significant: cell data, description, title, column names.
#[derive(Serialize)]
struct LlmTable<'a> {
    cell_data: Vec<&'a [String]>,
    description: &'a str,
    title: &'a str,
    column_names: &'a [String],
}

/// JSON object string for chat prompts, carrying at most two rows sampled
/// without replacement (kept in table order).
pub fn serialize_llm_json(t: &Table, seed: u64) -> String {
    let n = t.n_rows();
    let mut picked: Vec<usize> = sample(&mut seed::rng(seed), n, n.min(2)).into_vec();
    picked.sort_unstable();
    let obj = LlmTable {
        cell_data: picked.iter().map(|&i| t.rows()[i].as_slice()).collect(),
        description: t.description(),
        title: t.title(),
        column_names: t.column_names(),
    };
    serde_json::to_string(&obj).expect("llm table serializes")
}

/// Reads a table back from the chat JSON layout. `column_names` and
/// `cell_data` are required; missing title or description become empty.
pub fn parse_llm_json(json: &str, id: &str) -> Result<Table, TableError> {
    let v: Value = serde_json::from_str(json).map_err(|e| TableError::Parse {
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let text = |key: &str| -> Result<String, TableError> {
        match v.get(key) {
            None | Some(Value::Null) => Ok(String::new()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(TableError::Parse { field: key.into(), message: "expected string".into() }),
        }
    };
    let missing = |key: &str| TableError::Parse { field: key.into(), message: "missing".into() };
    let columns = string_list(v.get("column_names").ok_or_else(|| missing("column_names"))?, "column_names")?;
    let rows = row_list(v.get("cell_data").ok_or_else(|| missing("cell_data"))?, "cell_data")?;
    Table::new(id, text("title")?, text("description")?, columns, rows)
}

/// Index of the row embedded for `t` under `seed`, if the table has rows.
pub fn embedding_row(t: &Table, seed: u64) -> Option<usize> {
    (t.n_rows() > 0).then(|| seed::rng(seed).random_range(0..t.n_rows()))
}

/// Flat text `<title>. <col>, <col>. <cell>, <cell>` built from one random
/// row. Blank-cell mode puts the description after the title and leaves the
/// cell segment empty.
pub fn serialize_embedding_text(t: &Table, seed: u64, mode: SerializationMode) -> String {
    let columns = t.column_names().join(", ");
    match mode {
        SerializationMode::LlmJson => serialize_llm_json(t, seed),
        SerializationMode::EmbeddingText => {
            let cells = embedding_row(t, seed).map(|i| t.rows()[i].join(", ")).unwrap_or_default();
            format!("{}. {}. {}", t.title(), columns, cells)
        }
        SerializationMode::EmbeddingTextBlankCells => {
            if t.description().is_empty() {
                format!("{}. {}. ", t.title(), columns)
            } else {
                format!("{}. {}. {}. ", t.title(), t.description(), columns)
            }
        }
    }
}

/// How tables become encoder input: serialization mode, per-table row seed
/// derivation and token cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct TextView {
    pub mode: SerializationMode,
    /// Row choice for table `id` uses `derive_str(seed, id)`.
    pub seed: u64,
    pub token_cap: usize,
}

impl Default for TextView {
    fn default() -> Self {
        TextView { mode: SerializationMode::EmbeddingText, seed: 0, token_cap: DEFAULT_TOKEN_CAP }
    }
}

impl TextView {
    pub fn text(&self, t: &Table) -> String {
        let s = serialize_embedding_text(t, seed::derive_str(self.seed, t.id()), self.mode);
        truncate_tokens(&s, self.token_cap).to_string()
    }
}

/// `<title>. <description>`: the text channel of fused scoring.
pub fn serialize_title_description(t: &Table) -> String {
    format!("{}. {}", t.title(), t.description())
}

/// Keeps at most `cap` whitespace-delimited tokens. Text within the kept
/// prefix is returned verbatim.
pub fn truncate_tokens(s: &str, cap: usize) -> &str {
    let cap = cap.max(1);
    let mut count = 0;
    let mut in_token = false;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if in_token && count == cap {
                return &s[..i];
            }
            in_token = false;
        } else if !in_token {
            in_token = true;
            count += 1;
        }
    }
    s
}
