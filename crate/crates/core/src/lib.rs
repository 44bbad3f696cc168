//! Similar-table pair generation and table retrieval evaluation.
//!
//! The crate turns a corpus of tables into a benchmark of similar-table
//! pairs by applying analyst-style transformations (removal, concatenation,
//! edit, calculation, reordering, update) through a chat model, then
//! evaluates and trains table embeddings on similar-table retrieval.

pub mod audit;
pub mod embedding;
pub mod llm;
pub mod negatives;
pub mod ops;
pub mod retrieval;
pub mod scalar;
pub mod seed;
pub mod serialize;
pub mod synth;
pub mod table;
pub mod trainer;

pub use ops::{OperationKind, OperationPlan};
pub use scalar::Scalar;
pub use table::{ColumnKind, CorpusRecord, Table};

/// Unit-norm embedding in double precision.
pub type EmbeddingVector = embedding::Embedding<f64>;
pub type TableIndex = retrieval::Index<f64>;
pub type FusedTableIndex = retrieval::FusedIndex<f64>;
pub type QueryResult = retrieval::QueryResult<f64>;
pub type EvalReport = retrieval::EvalReport<f64>;
pub type ProjectionModel = trainer::ProjectionModel<f64>;
pub type TrainOutcome = trainer::TrainOutcome<f64>;
