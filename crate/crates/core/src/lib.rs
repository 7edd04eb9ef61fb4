//! Core library for a cluster-indexed text-to-SQL pipeline over a "union
//! schema" built from many SQLite databases: schema loading, lexical and
//! embedding text indexes, online column clustering, cluster-weighted table
//! retrieval, a step-numbered execution description language (EDL) with a
//! deterministic SQL compiler, an LLM bridge with fixture replay, and an
//! evaluation harness for retrieval recall and execution accuracy.

pub mod cluster;
pub mod compile;
pub mod edl;
pub mod error;
pub mod eval;
pub mod llm;
pub mod retrieve;
pub mod schema;
pub mod text;

pub use error::{ClusterError, ExecError, LlmError, RetrieveError, SchemaError, TextError};
