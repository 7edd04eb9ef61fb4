//! Prompt assembly for the three inference stages. All builders are pure
//! string functions of their inputs, so a prompt built twice is identical —
//! the property the fixture-replay transport depends on.

use serde::{Deserialize, Serialize};

use crate::error::LlmError;
use crate::llm::client::ChatMessage;
use crate::retrieve::ScoredTable;
use crate::schema::{SubSchema, SubSchemaTable, UnionSchema};

/// A retrieved table as presented to the selection stage: name, description
/// and column list, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub table_name: String,
    pub description: String,
    pub columns: Vec<String>,
}

/// Look ranked tables up in the union schema, preserving rank order.
/// Names absent from the schema are skipped with a warning.
pub fn candidates_from_ranking(schema: &UnionSchema, ranked: &[ScoredTable]) -> Vec<CandidateTable> {
    candidates_by_name(schema, ranked.iter().map(|s| s.table_name.as_str()))
}

pub fn candidates_by_name<'a>(
    schema: &UnionSchema,
    names: impl IntoIterator<Item = &'a str>,
) -> Vec<CandidateTable> {
    let mut out = Vec::new();
    for name in names {
        match schema.table(name) {
            Some(table) => out.push(CandidateTable {
                table_name: table.union_name.clone(),
                description: table.description.clone(),
                columns: table.columns.iter().map(|c| c.name.clone()).collect(),
            }),
            None => log::warn!("ranked table `{name}` is not in the union schema; skipped"),
        }
    }
    out
}

/// One worked example shipped with the crate and embedded into prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub question: String,
    /// Compact schema rendering: `Table(col, col); Other(col)`.
    pub schema_snippet: String,
    pub edl: String,
    pub sql: String,
}

/// Parse the compact `Table(col, col); Other(col)` snippet format used by
/// few-shot examples into a checkable sub-schema.
pub fn parse_schema_snippet(snippet: &str) -> SubSchema {
    let mut tables = Vec::new();
    for part in snippet.split(';') {
        let part = part.trim().trim_end_matches('.');
        if part.is_empty() {
            continue;
        }
        let (name, cols) = match part.split_once('(') {
            Some((name, rest)) => {
                let cols = rest
                    .trim_end_matches(')')
                    .split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect();
                (name.trim().to_string(), cols)
            }
            None => (part.to_string(), Vec::new()),
        };
        if !name.is_empty() {
            tables.push(SubSchemaTable { name, columns: cols });
        }
    }
    SubSchema { tables }
}

/// Render a sub-schema in the same compact format the snippets use.
pub fn render_schema(schema: &SubSchema) -> String {
    schema
        .tables
        .iter()
        .map(|t| format!("{}({})", t.name, t.columns.join(", ")))
        .collect::<Vec<_>>()
        .join("; ")
}

/// The few-shot examples shipped in the crate's assets.
pub fn default_few_shots() -> Vec<FewShotExample> {
    serde_json::from_str(include_str!("../../assets/few_shots.json"))
        .expect("shipped few-shot asset parses")
}

pub fn load_few_shots(path: &std::path::Path) -> Result<Vec<FewShotExample>, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::FixtureIo(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LlmError::FixtureIo(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// schema selection
// ---------------------------------------------------------------------------

const SELECTION_TASK: &str = "\
You map natural-language questions to the database tables and columns needed \
to answer them. You are given a ranked list of candidate tables, each with \
its columns.";

const SELECTION_INSTRUCTIONS: &str = "\
Reply with only a JSON object of the form \
{\"tables\": [\"table\"], \"columns\": {\"table\": [\"column\"]}}. \
Use table and column names exactly as they appear in the candidate list, \
and never name a table or column that is not listed. Include every table \
the query will need (tables joined through, not only tables projected \
from). If all columns of a table are needed, you may omit its entry in \
\"columns\".";

fn render_candidates(candidates: &[CandidateTable]) -> String {
    let mut out = String::from("Candidate tables, best match first:\n");
    for c in candidates {
        out.push_str(&format!("- {}: {}\n  columns: {}\n", c.table_name, c.description, c.columns.join(", ")));
    }
    out
}

fn selection_shot(shot: &FewShotExample) -> String {
    let schema = parse_schema_snippet(&shot.schema_snippet);
    let tables: Vec<String> = schema.tables.iter().map(|t| format!("\"{}\"", t.name)).collect();
    format!(
        "Question: {}\nSchema: {}\nAnswer: {{\"tables\": [{}]}}\n",
        shot.question,
        shot.schema_snippet,
        tables.join(", ")
    )
}

pub fn selection_messages(
    question: &str,
    candidates: &[CandidateTable],
    few_shots: &[FewShotExample],
) -> Vec<ChatMessage> {
    let mut user = String::new();
    if !few_shots.is_empty() {
        user.push_str("Examples:\n\n");
        for shot in few_shots {
            user.push_str(&selection_shot(shot));
            user.push('\n');
        }
    }
    user.push_str(&render_candidates(candidates));
    user.push_str(&format!("\nQuestion: {question}\nAnswer with only the JSON object."));
    vec![
        ChatMessage::system(format!("{SELECTION_TASK}\n\n{SELECTION_INSTRUCTIONS}")),
        ChatMessage::user(user),
    ]
}

// ---------------------------------------------------------------------------
// question → plan
// ---------------------------------------------------------------------------

/// Canonical line templates for every plan operator, embedded in the
/// generation prompt so responses parse.
const OPERATOR_REFERENCE: &str = "\
Each step is one line, numbered #1, #2, … . Steps may only reference earlier
steps. Available step templates:
  #n. Scan Table: Retrieve all rows from the [T] table.
  #n. Scan Table: Retrieve all rows from the [T] table aliased as T1.
  #n. Subquery: Retrieve all rows from the [T] table aliased as T1.
  #n. Join the [T] table aliased as T2 on the condition that T1.a equals T2.b.
  #n. Reserve rows of #k where {condition}.
  #n. Group #k by the [a] and [b] columns.
  #n. Apply Having Clause: Reserve the grouped rows of #k where {condition}.
  #n. Order #k by the [a] column in ascending order.   (or descending)
  #n. Limit #k to the top 5 record(s).
  #n. Select the [a] and [b] columns from the [T] table from the result of #k.
  #n. Apply union operation: Include the results in #i in the results in #j.
  #n. Apply intersect operation: Include the results in #i in the results in #j.
  #n. Apply except operation: Exclude the results in #i from the results in #j.
  #n. Compute [out] as the sum of [a] and [b].   (or difference, product, quotient)
  #n. Compute [out] as the year of [a].   (or month, day, day difference)
  #n. Compute [out] as a case statement where {condition}, then 'x', else 'y'.
  #n. Extract substring from [a] starting at position 1 for 3 characters as [out].
  #n. Cast [a] as [integer].
  #n. Compute the rank of [out] ordered by the [a] column in descending order using the RANK( ) window function.
Conditions compare columns like [a] or T1.a against literals, other columns,
aggregates such as count(*), or the result of an earlier step (\"[a] is not
in the result of #k\"); combine them with and/or. A Subquery step opens a
nested block: chain its filtering and a Select step onto it, then consume it
from the outer block via \"the result of #k\".";

const GENERATION_TASK: &str = "\
You translate natural-language questions over a relational schema into a \
numbered execution plan, one step per line, using only the step templates \
given below. The final step must produce the question's answer.";

fn generation_shot(shot: &FewShotExample) -> String {
    format!("Schema: {}\nQuestion: {}\nPlan:\n{}\n", shot.schema_snippet, shot.question, shot.edl)
}

pub fn generation_messages(
    question: &str,
    sub_schema: &SubSchema,
    few_shots: &[FewShotExample],
) -> Vec<ChatMessage> {
    let mut user = String::new();
    if !few_shots.is_empty() {
        user.push_str("Examples:\n\n");
        for shot in few_shots {
            user.push_str(&generation_shot(shot));
            user.push('\n');
        }
    }
    user.push_str(&format!(
        "Schema: {}\nQuestion: {question}\nReply with only the numbered plan.",
        render_schema(sub_schema)
    ));
    vec![
        ChatMessage::system(format!("{GENERATION_TASK}\n\n{OPERATOR_REFERENCE}")),
        ChatMessage::user(user),
    ]
}

// ---------------------------------------------------------------------------
// plan → SQL (LLM realization)
// ---------------------------------------------------------------------------

const SQL_TASK: &str = "\
You convert a numbered execution plan over a relational schema into a single \
SQLite SELECT statement that realizes the plan exactly. Reply with only the \
SQL statement.";

fn sql_shot(shot: &FewShotExample) -> String {
    format!("Schema: {}\nPlan:\n{}\nSQL: {}\n", shot.schema_snippet, shot.edl, shot.sql)
}

pub fn sql_messages(
    plan_text: &str,
    sub_schema: &SubSchema,
    few_shots: &[FewShotExample],
) -> Vec<ChatMessage> {
    let mut user = String::new();
    if !few_shots.is_empty() {
        user.push_str("Examples:\n\n");
        for shot in few_shots {
            user.push_str(&sql_shot(shot));
            user.push('\n');
        }
    }
    user.push_str(&format!(
        "Schema: {}\nPlan:\n{plan_text}\nSQL:",
        render_schema(sub_schema)
    ));
    vec![ChatMessage::system(SQL_TASK.to_string()), ChatMessage::user(user)]
}
