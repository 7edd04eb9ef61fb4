//! SQL execution against SQLite databases, the execution-accuracy and recall
//! metrics, and the end-to-end pipeline driver that chains retrieval, schema
//! selection, plan generation and SQL realization over a question set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use crate::compile::compile_or_explain;
use crate::error::ExecError;
use crate::llm::{
    candidates_from_ranking, client_for_config, default_few_shots, edl_to_sql_llm_with,
    generate_edl_with, select_schema_with, ChatApi, FewShotExample, LlmConfig,
};
use crate::retrieve::{
    rank_tables, recall_at_k, SchemaIndex, DEFAULT_CONTRIBUTION_FLOOR, DEFAULT_STAGE1_M,
};
use crate::schema::{gold_set_for, UnionSchema};
use crate::text::EmbeddingProvider;

/// Per-query execution budget.
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
/// The recall cutoffs every report carries.
pub const REPORT_KS: [usize; 5] = [1, 3, 5, 10, 15];

// ---------------------------------------------------------------------------
// result sets
// ---------------------------------------------------------------------------

/// One cell of a result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqlValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl SqlValue {
    fn type_rank(&self) -> u8 {
        match self {
            SqlValue::Null => 0,
            SqlValue::Integer(_) => 1,
            SqlValue::Real(_) => 2,
            SqlValue::Text(_) => 3,
            SqlValue::Blob(_) => 4,
        }
    }
}

/// Total order over cells (type rank, then value) so row multisets can be
/// compared by sorting. SQLite never yields NaN, so `total_cmp` on reals is
/// consistent with equality.
fn cmp_values(a: &SqlValue, b: &SqlValue) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (SqlValue::Integer(x), SqlValue::Integer(y)) => x.cmp(y),
        (SqlValue::Real(x), SqlValue::Real(y)) => x.total_cmp(y),
        (SqlValue::Text(x), SqlValue::Text(y)) => x.cmp(y),
        (SqlValue::Blob(x), SqlValue::Blob(y)) => x.cmp(y),
        (SqlValue::Null, SqlValue::Null) => Ordering::Equal,
        _ => a.type_rank().cmp(&b.type_rank()),
    }
}

fn cmp_rows(a: &[SqlValue], b: &[SqlValue]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = cmp_values(x, y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// Rows produced by one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

/// Run one query read-only against a database file. A query still running
/// after `timeout_ms` is interrupted and reported as [`ExecError::Timeout`].
pub fn execute_sql(db_path: &Path, sql: &str, timeout_ms: u64) -> Result<ResultSet, ExecError> {
    if !db_path.is_file() {
        return Err(ExecError::DatabaseUnavailable(db_path.display().to_string()));
    }
    let conn = Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(|e| ExecError::EngineError(e.to_string()))?;

    let timed_out = Arc::new(AtomicBool::new(false));
    let deadline = Instant::now() + Duration::from_millis(timeout_ms);
    let flag = Arc::clone(&timed_out);
    conn.progress_handler(
        1_000,
        Some(move || {
            let over = Instant::now() >= deadline;
            if over {
                flag.store(true, Ordering::SeqCst);
            }
            over
        }),
    );

    match run_query(&conn, sql) {
        Ok(result) => Ok(result),
        Err(_) if timed_out.load(Ordering::SeqCst) => Err(ExecError::Timeout(timeout_ms)),
        Err(e) => Err(ExecError::EngineError(e.to_string())),
    }
}

fn run_query(conn: &Connection, sql: &str) -> rusqlite::Result<ResultSet> {
    let mut stmt = conn.prepare(sql)?;
    let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
    let n = columns.len();
    let mut out_rows = Vec::new();
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            cells.push(match row.get_ref(i)? {
                ValueRef::Null => SqlValue::Null,
                ValueRef::Integer(v) => SqlValue::Integer(v),
                ValueRef::Real(v) => SqlValue::Real(v),
                ValueRef::Text(t) => SqlValue::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => SqlValue::Blob(b.to_vec()),
            });
        }
        out_rows.push(cells);
    }
    Ok(ResultSet { columns, rows: out_rows })
}

/// True when the statement carries an ORDER BY at its top level (not inside
/// a parenthesized subquery, string literal, or quoted identifier).
pub fn has_top_level_order_by(sql: &str) -> bool {
    let bytes = sql.as_bytes();
    let mut i = 0;
    let mut depth = 0u32;
    let mut prev_word_is_order = false;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' => {
                i += 1;
                while i < bytes.len() {
                    if bytes[i] == b'\'' {
                        if bytes.get(i + 1) == Some(&b'\'') {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                i += 1;
            }
            q @ (b'"' | b'`') => {
                i += 1;
                while i < bytes.len() && bytes[i] != q {
                    i += 1;
                }
                i += 1;
            }
            b'[' => {
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
                i += 1;
            }
            b'(' => {
                depth += 1;
                i += 1;
            }
            b')' => {
                depth = depth.saturating_sub(1);
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                if depth == 0 {
                    let word = sql[start..i].to_ascii_lowercase();
                    if prev_word_is_order && word == "by" {
                        return true;
                    }
                    prev_word_is_order = word == "order";
                }
            }
            _ => i += 1,
        }
    }
    false
}

/// Row-level equality of two result sets: ordered sequences when `ordered`,
/// multisets otherwise. Column names never matter; values compare
/// type-sensitively.
pub fn results_match(pred: &ResultSet, gold: &ResultSet, ordered: bool) -> bool {
    if pred.rows.len() != gold.rows.len() {
        return false;
    }
    if ordered {
        return pred.rows == gold.rows;
    }
    let mut p = pred.rows.clone();
    let mut g = gold.rows.clone();
    p.sort_by(|a, b| cmp_rows(a, b));
    g.sort_by(|a, b| cmp_rows(a, b));
    p == g
}

/// The execution-accuracy verdict: run both statements and compare row
/// multisets (sequences when the gold query orders its output). Any error —
/// engine rejection, timeout, even a failing gold query — folds into
/// `false`; this never raises.
pub fn execution_accuracy(pred_sql: &str, gold_sql: &str, db_path: &Path) -> bool {
    execution_accuracy_with(pred_sql, gold_sql, db_path, DEFAULT_TIMEOUT_MS)
}

pub fn execution_accuracy_with(
    pred_sql: &str,
    gold_sql: &str,
    db_path: &Path,
    timeout_ms: u64,
) -> bool {
    let gold = match execute_sql(db_path, gold_sql, timeout_ms) {
        Ok(g) => g,
        Err(e) => {
            log::warn!("gold SQL failed on {}: {e}", db_path.display());
            return false;
        }
    };
    let pred = match execute_sql(db_path, pred_sql, timeout_ms) {
        Ok(p) => p,
        Err(e) => {
            log::debug!("predicted SQL failed: {e}");
            return false;
        }
    };
    results_match(&pred, &gold, has_top_level_order_by(gold_sql))
}

// ---------------------------------------------------------------------------
// question sets and reports
// ---------------------------------------------------------------------------

/// One benchmark question: the text, its database, and the reference SQL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub question_id: String,
    pub db_id: String,
    pub question: String,
    pub gold_sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
}

/// Load a JSON-lines questions file (one [`ExamplePair`] object per line;
/// blank lines skipped).
pub fn load_examples_jsonl(path: &Path) -> Result<Vec<ExamplePair>, ExecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExecError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: ExamplePair = serde_json::from_str(line)
            .map_err(|e| ExecError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(pair);
    }
    Ok(out)
}

/// Something that went wrong for one question at one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub question_id: String,
    pub stage: String,
    pub reason: String,
}

/// Aggregated pipeline results: recall at the standard cutoffs, execution
/// accuracy per difficulty bucket (the "all" bucket is the question-weighted
/// aggregate over every question), and the per-question failure log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall_at: BTreeMap<usize, f64>,
    pub ex_by_bucket: BTreeMap<String, f64>,
    pub n_questions: usize,
    pub failures: Vec<Failure>,
}

/// Recall-only report for retrieval benchmarking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub recall_at: BTreeMap<usize, f64>,
    pub n_questions: usize,
    pub failures: Vec<Failure>,
}

/// Mean recall@k over the question set for each cutoff in `ks`. Questions
/// whose gold tables cannot be extracted (or whose retrieval fails) are
/// recorded as failures and left out of the means.
pub fn recall_report(
    examples: &[ExamplePair],
    schema: &UnionSchema,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    ks: &[usize],
    stage1_m: usize,
    floor: f64,
) -> RecallReport {
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let m = stage1_m.max(k_max);
    let mut sums: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut scored = 0usize;
    let mut failures = Vec::new();

    for example in examples {
        let gold = match gold_set_for(&example.question_id, &example.gold_sql, schema, &example.db_id)
        {
            Ok(g) => g,
            Err(e) => {
                failures.push(Failure {
                    question_id: example.question_id.clone(),
                    stage: "gold-tables".into(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let ranked = match rank_tables(&example.question, index, provider, m, k_max, floor) {
            Ok(r) => r,
            Err(e) => {
                failures.push(Failure {
                    question_id: example.question_id.clone(),
                    stage: "retrieve".into(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let names: Vec<String> = ranked.into_iter().map(|s| s.table_name).collect();
        scored += 1;
        for &k in ks {
            let r = recall_at_k(&names, &gold, k).unwrap_or(0.0);
            *sums.get_mut(&k).expect("k preset") += r;
        }
    }

    let recall_at = sums
        .into_iter()
        .map(|(k, sum)| (k, if scored == 0 { 0.0 } else { sum / scored as f64 }))
        .collect();
    RecallReport { recall_at, n_questions: examples.len(), failures }
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

/// Knobs for [`run_pipeline`]. `db_dir` holds the SQLite files, either flat
/// (`{db_id}.sqlite`) or nested benchmark-style (`{db_id}/{db_id}.sqlite`).
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub db_dir: PathBuf,
    /// Candidate tables handed to schema selection.
    pub k: usize,
    pub stage1_m: usize,
    pub floor: f64,
    pub timeout_ms: u64,
    /// Realize plans with the model instead of the deterministic compiler.
    pub use_llm_sql: bool,
    pub few_shots: Vec<FewShotExample>,
    /// Worker threads for question evaluation; 0 picks automatically, 1 runs
    /// serially (required for scripted single-sequence transports).
    pub parallelism: usize,
}

impl PipelineOptions {
    pub fn new(db_dir: impl Into<PathBuf>) -> Self {
        Self {
            db_dir: db_dir.into(),
            k: 10,
            stage1_m: DEFAULT_STAGE1_M,
            floor: DEFAULT_CONTRIBUTION_FLOOR,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            use_llm_sql: false,
            few_shots: default_few_shots(),
            parallelism: 0,
        }
    }
}

/// Locate a question's database under the configured directory.
pub fn resolve_db_path(db_dir: &Path, db_id: &str) -> Option<PathBuf> {
    let nested = db_dir.join(db_id).join(format!("{db_id}.sqlite"));
    if nested.is_file() {
        return Some(nested);
    }
    for ext in ["sqlite", "db", "sqlite3"] {
        let flat = db_dir.join(format!("{db_id}.{ext}"));
        if flat.is_file() {
            return Some(flat);
        }
    }
    None
}

struct QuestionOutcome {
    correct: bool,
    recall: Option<BTreeMap<usize, f64>>,
    failures: Vec<Failure>,
}

struct PipelineCtx<'a> {
    schema: &'a UnionSchema,
    index: &'a SchemaIndex,
    provider: &'a dyn EmbeddingProvider,
    config: &'a LlmConfig,
    options: &'a PipelineOptions,
    api: &'a dyn ChatApi,
}

/// Run the full pipeline over a question set: retrieval → schema selection →
/// plan generation → SQL (compiler or model) → execution accuracy. A failing
/// stage records a failure for that question and scores it incorrect; it
/// never aborts the batch.
pub fn run_pipeline(
    examples: &[ExamplePair],
    schema: &UnionSchema,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    config: &LlmConfig,
    options: &PipelineOptions,
) -> Result<EvalReport, ExecError> {
    let client = client_for_config(config).map_err(|e| ExecError::Config(e.to_string()))?;
    run_pipeline_with(examples, schema, index, provider, config, options, client.as_ref())
}

pub fn run_pipeline_with(
    examples: &[ExamplePair],
    schema: &UnionSchema,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    config: &LlmConfig,
    options: &PipelineOptions,
    api: &dyn ChatApi,
) -> Result<EvalReport, ExecError> {
    if !examples.is_empty() && !options.db_dir.is_dir() {
        return Err(ExecError::Config(format!(
            "database directory not found: {}",
            options.db_dir.display()
        )));
    }
    let ctx = PipelineCtx { schema, index, provider, config, options, api };

    let outcomes: Vec<QuestionOutcome> = if options.parallelism == 1 {
        examples.iter().map(|e| evaluate_question(&ctx, e)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism)
            .build()
            .map_err(|e| ExecError::Config(e.to_string()))?;
        pool.install(|| examples.par_iter().map(|e| evaluate_question(&ctx, e)).collect())
    };

    Ok(aggregate(examples, outcomes))
}

fn fail(example: &ExamplePair, stage: &str, reason: impl Into<String>) -> Failure {
    Failure {
        question_id: example.question_id.clone(),
        stage: stage.into(),
        reason: reason.into(),
    }
}

fn evaluate_question(ctx: &PipelineCtx<'_>, example: &ExamplePair) -> QuestionOutcome {
    let mut failures = Vec::new();
    let options = ctx.options;
    let k_rank = options.k.max(*REPORT_KS.last().expect("cutoffs"));
    let m = options.stage1_m.max(k_rank);

    // retrieval
    let ranked = match rank_tables(&example.question, ctx.index, ctx.provider, m, k_rank, options.floor)
    {
        Ok(r) => r,
        Err(e) => {
            failures.push(fail(example, "retrieve", e.to_string()));
            return QuestionOutcome { correct: false, recall: None, failures };
        }
    };
    let names: Vec<String> = ranked.iter().map(|s| s.table_name.clone()).collect();

    // recall against the gold tables, when they can be extracted
    let recall = match gold_set_for(&example.question_id, &example.gold_sql, ctx.schema, &example.db_id)
    {
        Ok(gold) => Some(
            REPORT_KS
                .iter()
                .map(|&k| (k, recall_at_k(&names, &gold, k).unwrap_or(0.0)))
                .collect(),
        ),
        Err(e) => {
            failures.push(fail(example, "gold-tables", e.to_string()));
            None
        }
    };

    // schema selection over the top-k candidates
    let top_k = &ranked[..options.k.min(ranked.len())];
    let candidates = candidates_from_ranking(ctx.schema, top_k);
    let sub_schema = match select_schema_with(
        &example.question,
        &candidates,
        ctx.config,
        &options.few_shots,
        ctx.api,
    ) {
        Ok(s) => s,
        Err(e) => {
            failures.push(fail(example, "select", e.to_string()));
            return QuestionOutcome { correct: false, recall, failures };
        }
    };

    // plan generation
    let generated = match generate_edl_with(
        &example.question,
        &sub_schema,
        ctx.config,
        &options.few_shots,
        ctx.api,
    ) {
        Ok(g) => g,
        Err(e) => {
            failures.push(fail(example, "generate-edl", e.to_string()));
            return QuestionOutcome { correct: false, recall, failures };
        }
    };

    // SQL realization
    let sql = if options.use_llm_sql {
        match edl_to_sql_llm_with(
            &generated.plan,
            &sub_schema,
            ctx.config,
            &options.few_shots,
            ctx.api,
        ) {
            Ok(q) => q.text,
            Err(e) => {
                failures.push(fail(example, "llm-sql", e.to_string()));
                return QuestionOutcome { correct: false, recall, failures };
            }
        }
    } else {
        match compile_or_explain(&generated.plan, &sub_schema) {
            Ok(q) => q.text,
            Err(diags) => {
                let summary = diags
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("; ");
                failures.push(fail(example, "compile", summary));
                return QuestionOutcome { correct: false, recall, failures };
            }
        }
    };

    // execution accuracy
    let Some(db_path) = resolve_db_path(&options.db_dir, &example.db_id) else {
        failures.push(fail(example, "execute", format!("no database file for `{}`", example.db_id)));
        return QuestionOutcome { correct: false, recall, failures };
    };
    let gold = match execute_sql(&db_path, &example.gold_sql, options.timeout_ms) {
        Ok(g) => g,
        Err(e) => {
            failures.push(fail(example, "gold-sql", e.to_string()));
            return QuestionOutcome { correct: false, recall, failures };
        }
    };
    let correct = match execute_sql(&db_path, &sql, options.timeout_ms) {
        Ok(pred) => results_match(&pred, &gold, has_top_level_order_by(&example.gold_sql)),
        Err(e) => {
            failures.push(fail(example, "execute", e.to_string()));
            false
        }
    };
    QuestionOutcome { correct, recall, failures }
}

fn aggregate(examples: &[ExamplePair], outcomes: Vec<QuestionOutcome>) -> EvalReport {
    let n = examples.len();
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    hits.insert("all".into(), (0, 0));
    let mut recall_sums: BTreeMap<usize, f64> = REPORT_KS.iter().map(|&k| (k, 0.0)).collect();
    let mut recall_scored = 0usize;
    let mut failures = Vec::new();

    for (example, outcome) in examples.iter().zip(outcomes) {
        let entry = hits.get_mut("all").expect("all bucket");
        entry.1 += 1;
        entry.0 += outcome.correct as usize;
        if let Some(bucket) = &example.difficulty {
            let entry = hits.entry(bucket.clone()).or_insert((0, 0));
            entry.1 += 1;
            entry.0 += outcome.correct as usize;
        }
        if let Some(recall) = outcome.recall {
            recall_scored += 1;
            for (k, r) in recall {
                *recall_sums.entry(k).or_insert(0.0) += r;
            }
        }
        failures.extend(outcome.failures);
    }

    let ex_by_bucket = hits
        .into_iter()
        .map(|(bucket, (correct, total))| {
            (bucket, if total == 0 { 0.0 } else { correct as f64 / total as f64 })
        })
        .collect();
    let recall_at = recall_sums
        .into_iter()
        .map(|(k, sum)| (k, if recall_scored == 0 { 0.0 } else { sum / recall_scored as f64 }))
        .collect();
    EvalReport { recall_at, ex_by_bucket, n_questions: n, failures }
}
