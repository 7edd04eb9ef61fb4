//! Prompted-inference stages: schema selection over retrieved candidates,
//! question→plan generation with a parse-repair loop, and an optional
//! LLM-based plan→SQL path. All three run against an OpenAI-compatible chat
//! endpoint through a [`ChatApi`]; in replay mode the transport is a fixture
//! file and nothing touches the network.

mod client;
mod prompts;

pub use client::{
    load_fixture, request_hash, save_fixture, ChatApi, ChatMessage, ChatRequest,
    FailOnConnectChat, FixtureEntry, HttpChatClient, RecordingClient, ReplayClient, ScriptedChat,
};
pub use prompts::{
    candidates_by_name, candidates_from_ranking, default_few_shots, generation_messages,
    load_few_shots, parse_schema_snippet, render_schema, selection_messages, sql_messages,
    CandidateTable, FewShotExample,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::compile::{Dialect, SqlQuery};
use crate::edl::{has_errors, parse_edl, validate_plan, EdlPlan, Severity};
use crate::error::LlmError;
use crate::schema::{SubSchema, SubSchemaTable};

/// How requests reach the model: a live endpoint, a recorded fixture, or
/// live with every exchange captured into a fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", content = "fixture", rename_all = "lowercase")]
pub enum LlmMode {
    #[default]
    Live,
    Replay(PathBuf),
    Record(PathBuf),
}

/// Connection and sampling settings for the chat endpoint.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(flatten, default)]
    pub mode: LlmMode,
}

fn default_max_retries() -> u32 {
    2
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "local".into(),
            api_key: None,
            temperature: 0.0,
            max_retries: default_max_retries(),
            mode: LlmMode::Live,
        }
    }
}

// The api key never appears in logs or debug dumps.
impl fmt::Debug for LlmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "********"))
            .field("temperature", &self.temperature)
            .field("max_retries", &self.max_retries)
            .field("mode", &self.mode)
            .finish()
    }
}

impl LlmConfig {
    /// Total request attempts per stage: the first try plus the retries.
    fn attempt_budget(&self) -> u32 {
        self.max_retries.saturating_add(1)
    }

    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest { model: self.model.clone(), temperature: self.temperature, messages }
    }
}

/// Build the transport the config asks for. Replay never opens a socket.
pub fn client_for_config(config: &LlmConfig) -> Result<Box<dyn ChatApi>, LlmError> {
    Ok(match &config.mode {
        LlmMode::Live => Box::new(HttpChatClient::new(&config.base_url, config.api_key.clone())?),
        LlmMode::Replay(path) => Box::new(ReplayClient::open(path)?),
        LlmMode::Record(path) => Box::new(RecordingClient::open(
            &config.base_url,
            config.api_key.clone(),
            path,
        )?),
    })
}

// ---------------------------------------------------------------------------
// response post-processing
// ---------------------------------------------------------------------------

/// If the response wraps its payload in a markdown fence, return the fence
/// body; otherwise the trimmed response.
fn strip_code_fences(raw: &str) -> String {
    if let Some(open) = raw.find("```") {
        let after = &raw[open + 3..];
        // skip a language tag up to end of line
        let body = match after.find('\n') {
            Some(nl) if after[..nl].len() <= 20 && !after[..nl].contains('`') => &after[nl + 1..],
            _ => after,
        };
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].trim().to_string();
    }
    raw.trim().to_string()
}

/// The first balanced `{…}` object in the text, tolerating prose around it.
fn extract_json_object(raw: &str) -> Result<serde_json::Value, String> {
    let text = strip_code_fences(raw);
    let start = text.find('{').ok_or("no JSON object in response")?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    let body = &text[start..=i];
                    return serde_json::from_str(body).map_err(|e| e.to_string());
                }
            }
            _ => {}
        }
    }
    Err("unbalanced JSON object in response".into())
}

// ---------------------------------------------------------------------------
// schema selection
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct SelectionResponse {
    tables: Vec<String>,
    #[serde(default)]
    columns: BTreeMap<String, Vec<String>>,
}

fn after_dot(name: &str) -> &str {
    name.split_once('.').map(|(_, rest)| rest).unwrap_or(name)
}

/// True when a name from the model refers to this candidate: the full union
/// name, or its bare table name after the `db_id.` prefix.
fn names_candidate(candidate: &CandidateTable, name: &str) -> bool {
    name.eq_ignore_ascii_case(&candidate.table_name)
        || name.eq_ignore_ascii_case(after_dot(&candidate.table_name))
}

fn sub_schema_of(candidates: &[CandidateTable]) -> SubSchema {
    SubSchema {
        tables: candidates
            .iter()
            .map(|c| SubSchemaTable { name: c.table_name.clone(), columns: c.columns.clone() })
            .collect(),
    }
}

/// Apply the containment rule: keep candidate tables the response names (in
/// rank order), with the named columns of each — hallucinated names are
/// dropped with a warning, and a table with no surviving column entry keeps
/// all its columns.
fn filter_selection(response: &SelectionResponse, candidates: &[CandidateTable]) -> SubSchema {
    for name in &response.tables {
        if !candidates.iter().any(|c| names_candidate(c, name)) {
            log::warn!("selection named unknown table `{name}`; dropped");
        }
    }
    let mut tables = Vec::new();
    for candidate in candidates {
        if !response.tables.iter().any(|n| names_candidate(candidate, n)) {
            continue;
        }
        let requested: Vec<&String> = response
            .columns
            .iter()
            .filter(|(table, _)| names_candidate(candidate, table))
            .flat_map(|(_, cols)| cols)
            .collect();
        let mut columns: Vec<String> = Vec::new();
        for col in &requested {
            if candidate.columns.iter().any(|c| c.eq_ignore_ascii_case(col)) {
                if !columns.iter().any(|c| c.eq_ignore_ascii_case(col)) {
                    columns.push((*col).clone());
                }
            } else {
                log::warn!(
                    "selection named unknown column `{col}` of `{}`; dropped",
                    candidate.table_name
                );
            }
        }
        if columns.is_empty() {
            columns = candidate.columns.clone();
        }
        tables.push(SubSchemaTable { name: candidate.table_name.clone(), columns });
    }
    SubSchema { tables }
}

/// Pick the tables (and columns) a question needs from ranked candidates.
/// A single candidate is returned directly, without a model call.
pub fn select_schema(
    question: &str,
    candidates: &[CandidateTable],
    config: &LlmConfig,
    few_shots: &[FewShotExample],
) -> Result<SubSchema, LlmError> {
    let client = client_for_config(config)?;
    select_schema_with(question, candidates, config, few_shots, client.as_ref())
}

pub fn select_schema_with(
    question: &str,
    candidates: &[CandidateTable],
    config: &LlmConfig,
    few_shots: &[FewShotExample],
    api: &dyn ChatApi,
) -> Result<SubSchema, LlmError> {
    if candidates.is_empty() {
        return Err(LlmError::EmptyCandidates);
    }
    if candidates.len() == 1 {
        return Ok(sub_schema_of(candidates));
    }

    let mut messages = selection_messages(question, candidates, few_shots);
    let attempts = config.attempt_budget();
    let mut last_error = String::new();
    for _ in 0..attempts {
        let raw = api.complete(&config.request(messages.clone()))?;
        let parsed = extract_json_object(&raw)
            .and_then(|v| serde_json::from_value::<SelectionResponse>(v).map_err(|e| e.to_string()));
        match parsed {
            Ok(response) => {
                let selected = filter_selection(&response, candidates);
                if !selected.tables.is_empty() {
                    return Ok(selected);
                }
                last_error = "the selection named no table from the candidate list".to_string();
            }
            Err(e) => last_error = e,
        }
        messages.push(ChatMessage::assistant(raw));
        messages.push(ChatMessage::user(format!(
            "That reply could not be used: {last_error}\nAnswer again with only the JSON \
             object, using table names exactly as listed."
        )));
    }
    Err(LlmError::UnparseableSelection { attempts, last_error })
}

// ---------------------------------------------------------------------------
// question → plan
// ---------------------------------------------------------------------------

/// A generated plan plus how many attempts the repair loop used and the
/// accepted plan text as the model wrote it.
#[derive(Debug, Clone, PartialEq)]
pub struct EdlGeneration {
    pub plan: EdlPlan,
    pub attempts: u32,
    pub text: String,
}

/// Generate a plan for the question over the selected sub-schema. Parse or
/// validation errors are appended to the conversation verbatim and the model
/// is asked again, up to the retry budget.
pub fn generate_edl(
    question: &str,
    sub_schema: &SubSchema,
    config: &LlmConfig,
    few_shots: &[FewShotExample],
) -> Result<EdlGeneration, LlmError> {
    let client = client_for_config(config)?;
    generate_edl_with(question, sub_schema, config, few_shots, client.as_ref())
}

pub fn generate_edl_with(
    question: &str,
    sub_schema: &SubSchema,
    config: &LlmConfig,
    few_shots: &[FewShotExample],
    api: &dyn ChatApi,
) -> Result<EdlGeneration, LlmError> {
    if sub_schema.tables.is_empty() {
        return Err(LlmError::EmptySubSchema);
    }

    let mut messages = generation_messages(question, sub_schema, few_shots);
    let budget = config.attempt_budget();
    let mut last_diagnostics = String::new();
    for attempt in 1..=budget {
        let raw = api.complete(&config.request(messages.clone()))?;
        let text = strip_code_fences(&raw);
        match parse_edl(&text) {
            Ok(plan) => {
                let diags = validate_plan(&plan, sub_schema);
                if !has_errors(&diags) {
                    return Ok(EdlGeneration { plan, attempts: attempt, text });
                }
                last_diagnostics = diags
                    .iter()
                    .filter(|d| d.severity == Severity::Error)
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("\n");
            }
            Err(e) => last_diagnostics = e.to_string(),
        }
        messages.push(ChatMessage::assistant(raw));
        messages.push(ChatMessage::user(format!(
            "The plan was rejected:\n{last_diagnostics}\nRewrite the complete numbered plan, \
             one step per line, following the step templates exactly."
        )));
    }
    Err(LlmError::NoValidEdl { attempts: budget, diagnostics: last_diagnostics })
}

// ---------------------------------------------------------------------------
// plan → SQL (LLM realization)
// ---------------------------------------------------------------------------

fn quote_sql_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// An in-memory database with the sub-schema's tables (untyped columns),
/// enough for `prepare` to check table and column references.
fn scratch_connection(schema: &SubSchema) -> Result<rusqlite::Connection, LlmError> {
    let conn = rusqlite::Connection::open_in_memory()
        .map_err(|e| LlmError::LlmUnavailable(format!("scratch database: {e}")))?;
    for table in &schema.tables {
        let mut columns: Vec<String> = Vec::new();
        for col in &table.columns {
            if !columns.iter().any(|c| c.eq_ignore_ascii_case(col)) {
                columns.push(col.clone());
            }
        }
        if columns.is_empty() {
            columns.push("placeholder".into());
        }
        let decl: Vec<String> = columns.iter().map(|c| quote_sql_ident(c)).collect();
        let ddl = format!(
            "CREATE TABLE IF NOT EXISTS {} ({});",
            quote_sql_ident(after_dot(&table.name)),
            decl.join(", ")
        );
        conn.execute_batch(&ddl)
            .map_err(|e| LlmError::LlmUnavailable(format!("scratch database: {e}")))?;
    }
    Ok(conn)
}

/// Cut the response down to one statement: fence body, then up to the first
/// top-level semicolon.
fn extract_sql(raw: &str) -> String {
    let text = strip_code_fences(raw);
    let bytes = text.as_bytes();
    let mut in_str = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            if b == b'\'' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'\'' => in_str = true,
            b';' => return text[..i].trim().to_string(),
            _ => {}
        }
    }
    text.trim().to_string()
}

/// Have the model realize the plan as SQL instead of the deterministic
/// compiler. The statement must prepare against the sub-schema; engine
/// rejections are fed back for one repair per remaining retry.
pub fn edl_to_sql_llm(
    plan: &EdlPlan,
    sub_schema: &SubSchema,
    config: &LlmConfig,
    few_shots: &[FewShotExample],
) -> Result<SqlQuery, LlmError> {
    let client = client_for_config(config)?;
    edl_to_sql_llm_with(plan, sub_schema, config, few_shots, client.as_ref())
}

pub fn edl_to_sql_llm_with(
    plan: &EdlPlan,
    sub_schema: &SubSchema,
    config: &LlmConfig,
    few_shots: &[FewShotExample],
    api: &dyn ChatApi,
) -> Result<SqlQuery, LlmError> {
    if sub_schema.tables.is_empty() {
        return Err(LlmError::EmptySubSchema);
    }
    let plan_text = crate::edl::render_edl(plan);
    let conn = scratch_connection(sub_schema)?;

    let mut messages = sql_messages(&plan_text, sub_schema, few_shots);
    let budget = config.attempt_budget();
    let mut last_error = String::new();
    for _ in 0..budget {
        let raw = api.complete(&config.request(messages.clone()))?;
        let sql = extract_sql(&raw);
        let lower = sql.to_ascii_lowercase();
        if !(lower.starts_with("select") || lower.starts_with("with")) {
            last_error = "the response does not start with a SELECT statement".into();
        } else {
            match conn.prepare(&sql) {
                Ok(_) => {
                    return Ok(SqlQuery {
                        text: sql,
                        dialect: Dialect::Sqlite,
                        source_plan_root: plan.root,
                    })
                }
                Err(e) => last_error = format!("SQLite rejected the statement: {e}"),
            }
        }
        messages.push(ChatMessage::assistant(raw));
        messages.push(ChatMessage::user(format!(
            "That SQL could not be used: {last_error}\nReply with only a corrected single \
             SQLite SELECT statement."
        )));
    }
    Err(LlmError::NoValidSql { attempts: budget, last_error })
}
