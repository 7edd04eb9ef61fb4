//! Python bindings for the text-to-SQL pipeline core.
//!
//! The module exposes the main pipeline surface — union schemas, the
//! cluster-weighted retrieval index, plan parsing/rendering/compilation,
//! clustering, the evaluation metrics, and fixture-replay pipeline runs —
//! using plain Python types (str, list, dict, float) at the boundary.
//! Embeddings always come from the built-in deterministic trigram hasher,
//! so results match the Rust CLI with the default provider.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cred_core::cluster::{cluster_columns as cluster_columns_rs, ColumnInput};
use cred_core::compile::compile_or_explain;
use cred_core::edl::{parse_edl, render_edl, validate_plan, EdlPlan};
use cred_core::eval::{
    execution_accuracy_with, run_pipeline, ExamplePair, PipelineOptions,
};
use cred_core::retrieve::{
    build_index_with, rank_tables, recall_at_k as recall_at_k_rs, retrieve_candidates,
    SchemaIndex,
};
use cred_core::schema::{
    build_union_schema, parse_manifest_json, GoldSet, SubSchema, UnionSchema,
};
use cred_core::text::{cosine as cosine_rs, EmbeddingProvider, TrigramEmbedder, Vector};
use cred_core::llm::{LlmConfig, LlmMode};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn vector_from(components: Vec<f64>) -> PyResult<Vector> {
    Vector::normalized(components).map_err(value_err)
}

/// A merged multi-database schema with union-qualified table names
/// ("db_id.TableName").
#[pyclass(frozen, module = "cred_py")]
struct Schema {
    inner: UnionSchema,
}

#[pymethods]
impl Schema {
    /// Parse a manifest (a JSON array of per-database schema entries) and
    /// merge it into one union schema.
    #[staticmethod]
    fn from_manifest(text: &str) -> PyResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(value_err)?;
        let schemas = parse_manifest_json(&value).map_err(value_err)?;
        let inner = build_union_schema(&schemas).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(value_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(runtime_err)
    }

    #[getter]
    fn table_count(&self) -> usize {
        self.inner.table_count
    }

    #[getter]
    fn column_count(&self) -> usize {
        self.inner.column_count
    }

    #[getter]
    fn db_ids(&self) -> Vec<String> {
        self.inner.db_ids.iter().cloned().collect()
    }

    /// Union-qualified table names in schema order.
    fn table_names(&self) -> Vec<String> {
        self.inner.tables.iter().map(|t| t.union_name.clone()).collect()
    }

    /// Column names of one table, by union-qualified name.
    fn columns_of(&self, union_name: &str) -> PyResult<Vec<String>> {
        let table = self
            .inner
            .table(union_name)
            .ok_or_else(|| value_err(format!("unknown table: {union_name}")))?;
        Ok(table.columns.iter().map(|c| c.name.clone()).collect())
    }

    /// The flattened single-database view used by the plan validator and
    /// compiler, as JSON. Pass `db_id` to narrow to one database.
    #[pyo3(signature = (db_id=None))]
    fn sub_schema_json(&self, db_id: Option<&str>) -> PyResult<String> {
        let sub = match db_id {
            Some(id) => SubSchema::from_db(&self.inner, id),
            None => SubSchema::from_union(&self.inner),
        };
        serde_json::to_string(&sub).map_err(runtime_err)
    }

    fn __len__(&self) -> usize {
        self.inner.table_count
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema(tables={}, columns={}, dbs={})",
            self.inner.table_count,
            self.inner.column_count,
            self.inner.db_ids.len()
        )
    }
}

/// The two-stage retrieval index: table-description embeddings plus
/// cluster-weighted column embeddings.
#[pyclass(frozen, module = "cred_py")]
struct Index {
    inner: SchemaIndex,
}

#[pymethods]
impl Index {
    /// Embed and cluster a schema with the built-in trigram embedder.
    #[staticmethod]
    #[pyo3(signature = (schema, s1=0.5, prefilter_top_n=50))]
    fn build(schema: &Schema, s1: f64, prefilter_top_n: Option<usize>) -> PyResult<Self> {
        let inner = build_index_with(&schema.inner, &TrigramEmbedder, s1, prefilter_top_n)
            .map_err(runtime_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(value_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_err)
    }

    #[getter]
    fn cluster_count(&self) -> usize {
        self.inner.cluster_table.cluster_count
    }

    #[getter]
    fn provider_fingerprint(&self) -> String {
        self.inner.provider_fingerprint.clone()
    }

    /// Stage-1 shortlist: table names by description similarity alone.
    #[pyo3(signature = (question, m=50))]
    fn candidates(&self, question: &str, m: usize) -> PyResult<Vec<String>> {
        retrieve_candidates(question, &self.inner, &TrigramEmbedder, m).map_err(value_err)
    }

    /// Full two-stage ranking. Returns (table_name, total, table_score,
    /// column_score_sum) tuples, best first.
    #[pyo3(signature = (question, m=50, k=10, floor=0.3))]
    fn rank(
        &self,
        question: &str,
        m: usize,
        k: usize,
        floor: f64,
    ) -> PyResult<Vec<(String, f64, f64, f64)>> {
        let ranked =
            rank_tables(question, &self.inner, &TrigramEmbedder, m, k, floor).map_err(value_err)?;
        Ok(ranked
            .into_iter()
            .map(|s| (s.table_name, s.total, s.table_score, s.column_score_sum))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Index(tables={}, columns={}, clusters={})",
            self.inner.tables.len(),
            self.inner.columns.len(),
            self.inner.cluster_table.cluster_count
        )
    }
}

/// A parsed execution-description plan: numbered steps, each one operator.
#[pyclass(frozen, module = "cred_py")]
struct Plan {
    inner: EdlPlan,
}

impl Plan {
    fn sub_schema(text: &str) -> PyResult<SubSchema> {
        serde_json::from_str(text).map_err(value_err)
    }
}

#[pymethods]
impl Plan {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_edl(text).map_err(value_err)? })
    }

    /// Render the plan back to its numbered-step text form.
    fn render(&self) -> String {
        render_edl(&self.inner)
    }

    /// Operator display name of each step, in order.
    fn step_names(&self) -> Vec<String> {
        self.inner.steps.iter().map(|s| s.op.name().to_string()).collect()
    }

    #[getter]
    fn root(&self) -> usize {
        self.inner.root
    }

    /// Check the plan against a sub-schema (JSON, as produced by
    /// `Schema.sub_schema_json`). Returns (step, severity, code, message)
    /// tuples; an empty list means clean.
    fn validate(&self, sub_schema_json: &str) -> PyResult<Vec<(usize, String, String, String)>> {
        let sub = Self::sub_schema(sub_schema_json)?;
        Ok(validate_plan(&self.inner, &sub)
            .into_iter()
            .map(|d| {
                (d.step_index, format!("{:?}", d.severity).to_lowercase(), d.code, d.message)
            })
            .collect())
    }

    /// Compile to a SQLite SELECT statement, validating first. Raises
    /// ValueError listing the diagnostics if the plan does not check out.
    fn compile(&self, sub_schema_json: &str) -> PyResult<String> {
        let sub = Self::sub_schema(sub_schema_json)?;
        match compile_or_explain(&self.inner, &sub) {
            Ok(query) => Ok(query.text),
            Err(diags) => {
                let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
                Err(value_err(lines.join("; ")))
            }
        }
    }

    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }

    fn __repr__(&self) -> String {
        format!("Plan(steps={}, root={})", self.inner.steps.len(), self.inner.root)
    }
}

/// Deterministic trigram-hash embedding of a text, as a unit vector.
#[pyfunction]
fn embed(text: &str) -> PyResult<Vec<f64>> {
    let v = TrigramEmbedder.embed(text).map_err(value_err)?;
    Ok(v.components().to_vec())
}

/// Cosine similarity of two raw vectors (normalized internally).
#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let va = vector_from(a)?;
    let vb = vector_from(b)?;
    cosine_rs(&va, &vb).map_err(value_err)
}

/// Incrementally cluster columns by embedding similarity.
///
/// `columns` is a list of (uuid, text, vector) triples. Returns
/// (assignments, sizes, cluster_count) where assignments maps uuid to
/// cluster id and sizes maps cluster id to member count.
#[pyfunction]
#[pyo3(signature = (columns, s1=0.5, prefilter_top_n=50))]
fn cluster_columns(
    columns: Vec<(String, String, Vec<f64>)>,
    s1: f64,
    prefilter_top_n: Option<usize>,
) -> PyResult<(BTreeMap<String, usize>, BTreeMap<usize, usize>, usize)> {
    let inputs: Vec<ColumnInput> = columns
        .into_iter()
        .map(|(uuid, text, comps)| Ok(ColumnInput { uuid, text, vector: vector_from(comps)? }))
        .collect::<PyResult<_>>()?;
    let table = cluster_columns_rs(&inputs, s1, prefilter_top_n).map_err(value_err)?;
    Ok((table.assignments, table.sizes, table.cluster_count))
}

/// Fraction of `gold` tables present in the top `k` of `ranked`.
#[pyfunction]
fn recall_at_k(ranked: Vec<String>, gold: Vec<String>, k: usize) -> PyResult<f64> {
    let gold_set = GoldSet {
        question_id: String::new(),
        tables: gold.into_iter().collect(),
    };
    recall_at_k_rs(&ranked, &gold_set, k).map_err(value_err)
}

/// Execute both queries read-only against a SQLite file and compare result
/// sets (ordered when the gold query has a top-level ORDER BY). Any error
/// on either side scores false.
#[pyfunction]
#[pyo3(signature = (pred_sql, gold_sql, db_path, timeout_ms=30_000))]
fn execution_accuracy(pred_sql: &str, gold_sql: &str, db_path: &str, timeout_ms: u64) -> bool {
    execution_accuracy_with(pred_sql, gold_sql, Path::new(db_path), timeout_ms)
}

/// Run the retrieval → selection → plan-generation → compile → execute
/// pipeline against a recorded response fixture (no network). `examples`
/// is a JSON list of {question_id, db_id, question, gold_sql} objects;
/// the result is the evaluation report as JSON.
#[pyfunction]
#[pyo3(signature = (schema, index, examples_json, fixture_path, db_dir, model="fixture-model", k=10, use_llm_sql=false))]
#[allow(clippy::too_many_arguments)]
fn run_replay_pipeline(
    schema: &Schema,
    index: &Index,
    examples_json: &str,
    fixture_path: &str,
    db_dir: &str,
    model: &str,
    k: usize,
    use_llm_sql: bool,
) -> PyResult<String> {
    let examples: Vec<ExamplePair> = serde_json::from_str(examples_json).map_err(value_err)?;
    let config = LlmConfig {
        base_url: "http://127.0.0.1:9".into(),
        model: model.to_string(),
        api_key: None,
        temperature: 0.0,
        max_retries: 2,
        mode: LlmMode::Replay(PathBuf::from(fixture_path)),
    };
    let mut options = PipelineOptions::new(db_dir);
    options.k = k;
    options.use_llm_sql = use_llm_sql;
    options.parallelism = 1;
    let report = run_pipeline(&examples, &schema.inner, &index.inner, &TrigramEmbedder, &config, &options)
        .map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

#[pymodule]
fn cred_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Schema>()?;
    m.add_class::<Index>()?;
    m.add_class::<Plan>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_columns, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(execution_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(run_replay_pipeline, m)?)?;
    m.add("TRIGRAM_FINGERPRINT", TrigramEmbedder.fingerprint())?;
    Ok(())
}
