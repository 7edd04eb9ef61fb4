//! Error types shared across the pipeline stages.

use thiserror::Error;

/// Errors raised while loading schema manifests or building union schemas.
#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("manifest file not found: {0}")]
    FileNotFound(String),
    #[error("malformed manifest: {field} at index {index}: {reason}")]
    MalformedManifest {
        field: String,
        index: usize,
        reason: String,
    },
    #[error("duplicate db_id: {0}")]
    DuplicateDbId(String),
    #[error("table `{table}` not found in database `{db_id}`")]
    UnresolvedTable { table: String, db_id: String },
}

/// Errors from embedding providers and similarity primitives.
#[derive(Debug, Error)]
pub enum TextError {
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("query is empty after tokenization")]
    EmptyQuery,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("invalid bm25 parameters: {0}")]
    InvalidBm25Params(String),
}

/// Errors from the column clustering stage.
#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("similarity threshold must be in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("duplicate column uuid: {0}")]
    DuplicateUuid(String),
    #[error("centroid list is empty")]
    EmptyCentroids,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cluster size must be at least 1")]
    ZeroSize,
    #[error("BM25 prefilter failed: {0}")]
    Prefilter(String),
}

/// Errors from index construction and two-stage retrieval.
#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("table `{0}` not present in the index")]
    UnknownTable(String),
    #[error("gold set is empty")]
    EmptyGold,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("stage-2 cutoff k={k} exceeds stage-1 candidate count m={m}")]
    KExceedsM { k: usize, m: usize },
    #[error("schema has no tables")]
    EmptySchema,
    #[error("index was built with embedder `{index}` but queried with `{provider}`")]
    ProviderMismatch { index: String, provider: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Errors from parsing EDL text into a plan.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EdlError {
    #[error("line {line}: unknown operator: {text}")]
    UnknownOperator { line: usize, text: String },
    #[error("line {line}: does not match the {operator} template: {detail}")]
    TemplateMismatch {
        line: usize,
        operator: String,
        detail: String,
    },
    #[error("step #{step} references #{referenced}, which is not an earlier step")]
    DanglingReference { step: usize, referenced: usize },
    #[error("step numbering must run 1..N: expected #{expected}, got #{got}")]
    NonContiguousNumbering { expected: usize, got: usize },
    #[error("plan has no steps")]
    EmptyPlan,
}

/// Raised when the lowering rules cannot realize a (syntactically valid)
/// plan as a single SQL statement.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("step #{step}: unsupported plan shape: {reason}")]
    UnsupportedShape { step: usize, reason: String },
}

/// Errors from SQL execution against fixture or benchmark databases.
#[derive(Debug, Error)]
pub enum ExecError {
    #[error("engine error: {0}")]
    EngineError(String),
    #[error("query exceeded the {0} ms timeout")]
    Timeout(u64),
    #[error("database file not readable: {0}")]
    DatabaseUnavailable(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Errors from the LLM bridge stages.
#[derive(Debug, Error)]
pub enum LlmError {
    #[error("llm endpoint unavailable: {0}")]
    LlmUnavailable(String),
    #[error("no replay fixture entry for request hash {0}")]
    FixtureMiss(String),
    #[error("selection response unparseable after {attempts} attempts: {last_error}")]
    UnparseableSelection { attempts: u32, last_error: String },
    #[error("no valid EDL after {attempts} attempts; last diagnostics:\n{diagnostics}")]
    NoValidEdl { attempts: u32, diagnostics: String },
    #[error("no valid SQL after {attempts} attempts: {last_error}")]
    NoValidSql { attempts: u32, last_error: String },
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("sub-schema is empty")]
    EmptySubSchema,
    #[error("fixture file error: {0}")]
    FixtureIo(String),
}
