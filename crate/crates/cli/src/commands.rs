//! One handler per subcommand. Handlers return data to print (or print
//! streaming output themselves) and surface every failure as a [`CliError`];
//! exit-code mapping lives in `main`.

use std::io::Read;
use std::path::{Path, PathBuf};

use cred_core::compile::{compile, compile_or_explain, SqlQuery};
use cred_core::edl::{has_errors, parse_edl, render_edl, validate_plan, Diagnostic, EdlPlan};
use cred_core::eval::{
    execute_sql, load_examples_jsonl, recall_report, resolve_db_path, results_match,
    run_pipeline, has_top_level_order_by, EvalReport, PipelineOptions, RecallReport, ResultSet,
};
use cred_core::llm::{
    candidates_from_ranking, default_few_shots, generate_edl, load_few_shots,
    parse_schema_snippet, select_schema, CandidateTable, FewShotExample,
};
use cred_core::retrieve::{build_index_with, rank_tables, ScoredTable, SchemaIndex};
use cred_core::schema::{build_union_schema, load_tables_manifest, SubSchema, UnionSchema};

use crate::config::{require_file, CliConfig};
use crate::CliError;

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

fn read_input(file: Option<&Path>) -> Result<String, CliError> {
    match file {
        Some(path) => {
            require_file(path, "input file")?;
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn load_schema(config: &CliConfig, manifest: Option<&Path>) -> Result<UnionSchema, CliError> {
    let path = match manifest {
        Some(p) => p,
        None => config.manifest_path()?,
    };
    require_file(path, "schema manifest")?;
    let schemas = load_tables_manifest(path)?;
    Ok(build_union_schema(&schemas)?)
}

fn load_index(config: &CliConfig, index: Option<&Path>) -> Result<SchemaIndex, CliError> {
    let path = match index {
        Some(p) => p,
        None => config.index_path()?,
    };
    require_file(path, "index file")?;
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a valid index: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn few_shots_for(path: Option<&Path>) -> Result<Vec<FewShotExample>, CliError> {
    match path {
        Some(p) => {
            require_file(p, "few-shot file")?;
            Ok(load_few_shots(p)?)
        }
        None => Ok(default_few_shots()),
    }
}

fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

/// How the plan-facing commands obtain a sub-schema: a database from the
/// manifest, an inline snippet, or (compile only) nothing at all.
pub struct SchemaSource<'a> {
    pub db: Option<&'a str>,
    pub snippet: Option<&'a str>,
    pub manifest: Option<&'a Path>,
}

impl SchemaSource<'_> {
    fn resolve(&self, config: &CliConfig) -> Result<Option<SubSchema>, CliError> {
        if let Some(snippet) = self.snippet {
            return Ok(Some(parse_schema_snippet(snippet)));
        }
        if let Some(db_id) = self.db {
            let schema = load_schema(config, self.manifest)?;
            let sub = SubSchema::from_db(&schema, db_id);
            if sub.tables.is_empty() {
                return Err(CliError::Config(format!("manifest has no database `{db_id}`")));
            }
            return Ok(Some(sub));
        }
        Ok(None)
    }

    fn require(&self, config: &CliConfig) -> Result<SubSchema, CliError> {
        self.resolve(config)?
            .ok_or_else(|| CliError::Config("a schema is required: pass --db or --snippet".into()))
    }
}

// ---------------------------------------------------------------------------
// schema / index commands
// ---------------------------------------------------------------------------

pub fn schema_dump(config: &CliConfig, manifest: Option<&Path>) -> Result<UnionSchema, CliError> {
    load_schema(config, manifest)
}

#[derive(serde::Serialize)]
pub struct IndexSummary {
    pub tables: usize,
    pub columns: usize,
    pub clusters: usize,
    pub provider: String,
    pub out: PathBuf,
}

pub fn index_build(
    config: &CliConfig,
    manifest: Option<&Path>,
    out: Option<&Path>,
) -> Result<IndexSummary, CliError> {
    let schema = load_schema(config, manifest)?;
    let provider = config.embedding.build()?;
    let index = build_index_with(
        &schema,
        provider.as_ref(),
        config.retrieval.s1,
        config.retrieval.prefilter(),
    )?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => config.index_path()?.to_path_buf(),
    };
    write_json(&out, &index)?;
    Ok(IndexSummary {
        tables: index.tables.len(),
        columns: index.columns.len(),
        clusters: index.cluster_table.cluster_count,
        provider: index.provider_fingerprint,
        out,
    })
}

pub fn cluster(
    config: &CliConfig,
    manifest: Option<&Path>,
    out: Option<&Path>,
) -> Result<Option<cred_core::cluster::ClusterTable>, CliError> {
    let schema = load_schema(config, manifest)?;
    let provider = config.embedding.build()?;
    // Reuse the index build so the standalone clustering view always matches
    // what retrieval will use.
    let index = build_index_with(
        &schema,
        provider.as_ref(),
        config.retrieval.s1,
        config.retrieval.prefilter(),
    )?;
    match out {
        Some(path) => {
            write_json(path, &index.cluster_table)?;
            Ok(None)
        }
        None => Ok(Some(index.cluster_table)),
    }
}

pub fn retrieve(
    config: &CliConfig,
    question: &str,
    index_path: Option<&Path>,
    k: Option<usize>,
) -> Result<Vec<ScoredTable>, CliError> {
    let index = load_index(config, index_path)?;
    let provider = config.embedding.build()?;
    let k = k.unwrap_or(config.retrieval.k);
    let m = config.retrieval.m.max(k);
    Ok(rank_tables(question, &index, provider.as_ref(), m, k, config.retrieval.floor)?)
}

pub fn eval_recall(
    config: &CliConfig,
    questions: &Path,
    manifest: Option<&Path>,
    index_path: Option<&Path>,
    ks: &[usize],
) -> Result<RecallReport, CliError> {
    require_file(questions, "questions file")?;
    let examples = load_examples_jsonl(questions)?;
    let schema = load_schema(config, manifest)?;
    let index = load_index(config, index_path)?;
    let provider = config.embedding.build()?;
    Ok(recall_report(
        &examples,
        &schema,
        &index,
        provider.as_ref(),
        ks,
        config.retrieval.m,
        config.retrieval.floor,
    ))
}

// ---------------------------------------------------------------------------
// plan commands
// ---------------------------------------------------------------------------

pub fn parse_edl_cmd(file: Option<&Path>) -> Result<EdlPlan, CliError> {
    let text = read_input(file)?;
    Ok(parse_edl(&text)?)
}

pub fn render_edl_cmd(file: Option<&Path>) -> Result<String, CliError> {
    let text = read_input(file)?;
    let plan: EdlPlan = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("input is not a serialized plan: {e}")))?;
    Ok(render_edl(&plan))
}

pub struct CompileOutcome {
    pub sql: SqlQuery,
    pub rows: Option<ResultSet>,
}

pub fn compile_edl_cmd(
    config: &CliConfig,
    file: Option<&Path>,
    source: &SchemaSource<'_>,
    execute: Option<&Path>,
) -> Result<CompileOutcome, CliError> {
    let text = read_input(file)?;
    let plan = parse_edl(&text)?;
    // With an explicit schema the plan is fully validated against it; without
    // one, compilation proceeds on block structure alone (name checks need a
    // schema to check against).
    let sql = match source.resolve(config)? {
        Some(sub) => {
            let diags = validate_plan(&plan, &sub);
            print_diagnostics(&diags);
            if has_errors(&diags) {
                return Err(CliError::Domain("plan failed validation".into()));
            }
            compile_or_explain(&plan, &sub).map_err(|diags| {
                print_diagnostics(&diags);
                CliError::Domain("plan failed to compile".into())
            })?
        }
        None => compile(&plan, &SubSchema::default())?,
    };
    let rows = match execute {
        Some(db_path) => {
            require_file(db_path, "database")?;
            Some(execute_sql(db_path, &sql.text, config.timeout_ms)?)
        }
        None => None,
    };
    Ok(CompileOutcome { sql, rows })
}

// ---------------------------------------------------------------------------
// model-backed commands
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
pub struct GeneratedPlan {
    pub edl: String,
    pub attempts: u32,
    /// Compiled SQL, when requested and compilable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
}

pub fn gen_edl(
    config: &CliConfig,
    question: &str,
    source: &SchemaSource<'_>,
    few_shot_path: Option<&Path>,
    with_sql: bool,
) -> Result<GeneratedPlan, CliError> {
    let sub = source.require(config)?;
    let few_shots = few_shots_for(few_shot_path)?;
    let llm = config.llm_config()?;
    let generated = generate_edl(question, &sub, &llm, &few_shots)?;
    let sql = if with_sql {
        Some(
            compile_or_explain(&generated.plan, &sub)
                .map_err(|diags| {
                    print_diagnostics(&diags);
                    CliError::Domain("generated plan failed to compile".into())
                })?
                .text,
        )
    } else {
        None
    };
    Ok(GeneratedPlan { edl: render_edl(&generated.plan), attempts: generated.attempts, sql })
}

pub fn select_schema_cmd(
    config: &CliConfig,
    question: &str,
    manifest: Option<&Path>,
    index_path: Option<&Path>,
    k: Option<usize>,
    few_shot_path: Option<&Path>,
) -> Result<SubSchema, CliError> {
    let schema = load_schema(config, manifest)?;
    let index = load_index(config, index_path)?;
    let provider = config.embedding.build()?;
    let k = k.unwrap_or(config.retrieval.k);
    let m = config.retrieval.m.max(k);
    let ranked = rank_tables(question, &index, provider.as_ref(), m, k, config.retrieval.floor)?;
    let candidates: Vec<CandidateTable> = candidates_from_ranking(&schema, &ranked);
    let few_shots = few_shots_for(few_shot_path)?;
    let llm = config.llm_config()?;
    Ok(select_schema(question, &candidates, &llm, &few_shots)?)
}

// ---------------------------------------------------------------------------
// evaluation commands
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
pub struct ExVerdict {
    pub r#match: bool,
    pub ordered: bool,
    pub pred_rows: usize,
    pub gold_rows: usize,
}

pub fn eval_ex(
    config: &CliConfig,
    pred: &str,
    gold: &str,
    db: &str,
) -> Result<ExVerdict, CliError> {
    let db_path = locate_db(config, db)?;
    let gold_rows = execute_sql(&db_path, gold, config.timeout_ms)?;
    let pred_rows = execute_sql(&db_path, pred, config.timeout_ms)?;
    let ordered = has_top_level_order_by(gold);
    Ok(ExVerdict {
        r#match: results_match(&pred_rows, &gold_rows, ordered),
        ordered,
        pred_rows: pred_rows.rows.len(),
        gold_rows: gold_rows.rows.len(),
    })
}

/// Accept either a direct path to a SQLite file or a database id resolved
/// under the configured databases directory.
fn locate_db(config: &CliConfig, db: &str) -> Result<PathBuf, CliError> {
    let as_path = Path::new(db);
    if as_path.is_file() {
        return Ok(as_path.to_path_buf());
    }
    let dir = config.databases_dir()?;
    resolve_db_path(dir, db).ok_or_else(|| {
        CliError::Config(format!("no database `{db}` under {}", dir.display()))
    })
}

pub fn pipeline(
    config: &CliConfig,
    questions: &Path,
    manifest: Option<&Path>,
    index_path: Option<&Path>,
    use_llm_sql: bool,
    few_shot_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<EvalReport, CliError> {
    require_file(questions, "questions file")?;
    let examples = load_examples_jsonl(questions)?;
    let schema = load_schema(config, manifest)?;
    let index = load_index(config, index_path)?;
    let provider = config.embedding.build()?;
    let llm = config.llm_config()?;
    let mut options = PipelineOptions::new(config.databases_dir()?);
    options.k = config.retrieval.k;
    options.stage1_m = config.retrieval.m;
    options.floor = config.retrieval.floor;
    options.timeout_ms = config.timeout_ms;
    options.use_llm_sql = use_llm_sql;
    options.few_shots = few_shots_for(few_shot_path)?;
    options.parallelism = config.parallelism;
    let report = run_pipeline(&examples, &schema, &index, provider.as_ref(), &llm, &options)?;
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}
