//! Multi-database schema manifests, union schemas, and gold table extraction.
//!
//! The input format is the benchmark `tables.json` manifest: an array of
//! per-database entries carrying `db_id`, `table_names_original`,
//! `column_names_original` (pairs of table index and column name) and
//! `column_types`. A union schema merges every database into one large
//! schema by renaming each table to `db_id.original_name`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// A column as declared by the manifest, owned by one union table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Free text; falls back to the column name when the manifest has none.
    pub description: String,
    pub data_type: String,
    /// union_name of the owning table.
    pub table_key: String,
}

/// One table of the union schema, renamed to `db_id.original_name`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionTable {
    pub db_id: String,
    pub original_name: String,
    pub union_name: String,
    pub description: String,
    pub columns: Vec<ColumnMeta>,
}

/// The merged multi-database schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionSchema {
    pub tables: Vec<UnionTable>,
    pub db_ids: BTreeSet<String>,
    pub column_count: usize,
    pub table_count: usize,
}

/// Tables referenced by one gold SQL query, as union names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    pub question_id: String,
    pub tables: BTreeSet<String>,
}

/// A single database schema as loaded from the manifest, before merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbSchema {
    pub db_id: String,
    pub tables: Vec<DbTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbTable {
    pub name: String,
    /// Human-readable name from `table_names`, when the manifest provides one.
    pub friendly_name: Option<String>,
    pub columns: Vec<DbColumn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbColumn {
    pub name: String,
    pub friendly_name: Option<String>,
    pub data_type: String,
}

#[derive(Deserialize)]
struct RawManifestEntry {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default)]
    table_names: Option<Vec<String>>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_names: Option<Vec<(i64, String)>>,
    column_types: Vec<String>,
}

fn malformed(field: &str, index: usize, reason: impl Into<String>) -> SchemaError {
    SchemaError::MalformedManifest {
        field: field.to_string(),
        index,
        reason: reason.into(),
    }
}

/// Load a `tables.json`-style manifest into one [`DbSchema`] per database.
///
/// Table and column ordering is preserved from the manifest. The leading
/// `[-1, "*"]` pseudo-column is skipped.
pub fn load_tables_manifest(path: impl AsRef<Path>) -> Result<Vec<DbSchema>, SchemaError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SchemaError::FileNotFound(path.display().to_string())
        } else {
            malformed("file", 0, e.to_string())
        }
    })?;
    let raw: Vec<RawManifestEntry> = serde_json::from_slice(&bytes)
        .map_err(|e| malformed("json", 0, e.to_string()))?;
    parse_manifest_entries(raw)
}

fn parse_manifest_entries(raw: Vec<RawManifestEntry>) -> Result<Vec<DbSchema>, SchemaError> {
    let mut seen = BTreeSet::new();
    let mut schemas = Vec::with_capacity(raw.len());
    for (db_index, entry) in raw.into_iter().enumerate() {
        if entry.db_id.trim().is_empty() {
            return Err(malformed("db_id", db_index, "empty"));
        }
        if !seen.insert(entry.db_id.clone()) {
            return Err(malformed(
                "db_id",
                db_index,
                format!("duplicate db_id `{}`", entry.db_id),
            ));
        }
        if entry.column_types.len() != entry.column_names_original.len() {
            return Err(malformed(
                "column_types",
                db_index,
                format!(
                    "length {} does not match column_names_original length {}",
                    entry.column_types.len(),
                    entry.column_names_original.len()
                ),
            ));
        }
        if let Some(names) = &entry.table_names {
            if names.len() != entry.table_names_original.len() {
                return Err(malformed(
                    "table_names",
                    db_index,
                    "length does not match table_names_original",
                ));
            }
        }

        let mut tables: Vec<DbTable> = entry
            .table_names_original
            .iter()
            .enumerate()
            .map(|(i, name)| {
                if name.trim().is_empty() {
                    return Err(malformed("table_names_original", i, "empty table name"));
                }
                Ok(DbTable {
                    name: name.clone(),
                    friendly_name: entry.table_names.as_ref().map(|n| n[i].clone()),
                    columns: Vec::new(),
                })
            })
            .collect::<Result<_, _>>()?;

        for (col_index, (table_idx, col_name)) in entry.column_names_original.iter().enumerate() {
            if *table_idx < 0 {
                continue; // the "*" pseudo-column
            }
            let ti = *table_idx as usize;
            if ti >= tables.len() {
                return Err(malformed(
                    "column_names_original",
                    col_index,
                    format!("table index {ti} out of range"),
                ));
            }
            if col_name.trim().is_empty() {
                return Err(malformed("column_names_original", col_index, "empty column name"));
            }
            let friendly = entry
                .column_names
                .as_ref()
                .and_then(|n| n.get(col_index))
                .map(|(_, name)| name.clone());
            tables[ti].columns.push(DbColumn {
                name: col_name.clone(),
                friendly_name: friendly,
                data_type: entry.column_types[col_index].clone(),
            });
        }
        schemas.push(DbSchema {
            db_id: entry.db_id,
            tables,
        });
    }
    Ok(schemas)
}

/// Merge per-database schemas into one union schema, renaming every table
/// to `db_id.original_name`.
pub fn build_union_schema(schemas: &[DbSchema]) -> Result<UnionSchema, SchemaError> {
    let mut db_ids = BTreeSet::new();
    for schema in schemas {
        if !db_ids.insert(schema.db_id.clone()) {
            return Err(SchemaError::DuplicateDbId(schema.db_id.clone()));
        }
    }

    let mut tables = Vec::new();
    let mut column_count = 0;
    for schema in schemas {
        for table in &schema.tables {
            let union_name = format!("{}.{}", schema.db_id, table.name);
            let display = table.friendly_name.as_deref().unwrap_or(&table.name);
            let col_names: Vec<&str> = table
                .columns
                .iter()
                .map(|c| c.friendly_name.as_deref().unwrap_or(&c.name))
                .collect();
            let description = format!("table {} with columns {}", display, col_names.join(", "));
            let columns: Vec<ColumnMeta> = table
                .columns
                .iter()
                .map(|c| ColumnMeta {
                    name: c.name.clone(),
                    description: c
                        .friendly_name
                        .clone()
                        .filter(|f| !f.trim().is_empty())
                        .unwrap_or_else(|| c.name.clone()),
                    data_type: c.data_type.clone(),
                    table_key: union_name.clone(),
                })
                .collect();
            column_count += columns.len();
            tables.push(UnionTable {
                db_id: schema.db_id.clone(),
                original_name: table.name.clone(),
                union_name,
                description,
                columns,
            });
        }
    }

    Ok(UnionSchema {
        table_count: tables.len(),
        column_count,
        tables,
        db_ids,
    })
}

impl UnionSchema {
    pub fn table(&self, union_name: &str) -> Option<&UnionTable> {
        self.tables.iter().find(|t| t.union_name == union_name)
    }

    /// Case-insensitive lookup of a table within one source database.
    pub fn resolve_in_db(&self, db_id: &str, table: &str) -> Option<&UnionTable> {
        self.tables
            .iter()
            .find(|t| t.db_id == db_id && t.original_name.eq_ignore_ascii_case(table))
    }
}

/// The narrowed schema handed to plan validation and generation: just the
/// tables (with their columns) chosen for one question. Table names may be
/// either plain ("Student") or union-qualified ("pets_1.Student").
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSchema {
    pub tables: Vec<SubSchemaTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSchemaTable {
    pub name: String,
    pub columns: Vec<String>,
}

impl SubSchemaTable {
    /// Whether `name` matches this table, case-insensitively, against either
    /// the full stored name or the part after its "db_id." prefix.
    pub fn matches(&self, name: &str) -> bool {
        if self.name.eq_ignore_ascii_case(name) {
            return true;
        }
        match self.name.split_once('.') {
            Some((_, bare)) => bare.eq_ignore_ascii_case(name),
            None => false,
        }
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.eq_ignore_ascii_case(name))
    }
}

impl SubSchema {
    pub fn table(&self, name: &str) -> Option<&SubSchemaTable> {
        self.tables.iter().find(|t| t.matches(name))
    }

    /// View a whole union schema as a sub-schema (no narrowing).
    pub fn from_union(schema: &UnionSchema) -> SubSchema {
        SubSchema {
            tables: schema
                .tables
                .iter()
                .map(|t| SubSchemaTable {
                    name: t.union_name.clone(),
                    columns: t.columns.iter().map(|c| c.name.clone()).collect(),
                })
                .collect(),
        }
    }

    /// The tables of one source database, as plain (unprefixed) names.
    pub fn from_db(schema: &UnionSchema, db_id: &str) -> SubSchema {
        SubSchema {
            tables: schema
                .tables
                .iter()
                .filter(|t| t.db_id == db_id)
                .map(|t| SubSchemaTable {
                    name: t.original_name.clone(),
                    columns: t.columns.iter().map(|c| c.name.clone()).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SqlTok<'a> {
    Ident(&'a str),
    Punct(char),
    StringLit,
    Number,
}

/// Lexer just strong enough to find table references: identifiers (bare,
/// double-quoted, backticked or bracketed), string literals, numbers and
/// punctuation. Comments are not expected in gold SQL.
fn lex_sql(sql: &str) -> Vec<SqlTok<'_>> {
    let bytes = sql.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' {
            i += 1;
            while i < bytes.len() {
                if bytes[i] == b'\'' {
                    if bytes.get(i + 1) == Some(&b'\'') {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            toks.push(SqlTok::StringLit);
        } else if c == '"' || c == '`' {
            let quote = bytes[i];
            let start = i + 1;
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                i += 1;
            }
            toks.push(SqlTok::Ident(&sql[start..i]));
            i = (i + 1).min(bytes.len());
        } else if c == '[' {
            let start = i + 1;
            while i < bytes.len() && bytes[i] != b']' {
                i += 1;
            }
            toks.push(SqlTok::Ident(&sql[start..i]));
            i = (i + 1).min(bytes.len());
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push(SqlTok::Ident(&sql[start..i]));
        } else if c.is_ascii_digit() {
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'.')
            {
                i += 1;
            }
            toks.push(SqlTok::Number);
        } else {
            toks.push(SqlTok::Punct(c));
            i += 1;
        }
    }
    toks
}

const CLAUSE_KEYWORDS: &[&str] = &[
    "where", "group", "order", "having", "limit", "on", "select", "union", "intersect", "except",
    "join", "inner", "left", "right", "full", "cross", "natural", "outer",
];

fn is_keyword(word: &str) -> bool {
    CLAUSE_KEYWORDS.contains(&word.to_ascii_lowercase().as_str())
        || matches!(word.to_ascii_lowercase().as_str(), "as" | "and" | "or" | "not" | "in" | "from" | "by" | "distinct" | "asc" | "desc")
}

/// Extract the tables referenced in FROM/JOIN clauses of a gold SQL query,
/// at any nesting depth, excluding aliases, as a [`GoldSet`] of union names.
///
/// Uses a context-tracking tokenizer rather than a full grammar: table
/// identifiers follow FROM (possibly a comma-separated list) or JOIN.
pub fn gold_tables_of(
    sql: &str,
    schema: &UnionSchema,
    db_id: &str,
) -> Result<BTreeSet<String>, SchemaError> {
    let toks = lex_sql(sql);
    let mut tables = BTreeSet::new();
    let mut depth = 0usize;
    // Depths at which a FROM list is still accepting comma-separated refs.
    let mut from_depths: Vec<usize> = Vec::new();
    let mut expect_table = false;
    let mut after_table_ref = false;

    let mut i = 0;
    while i < toks.len() {
        match toks[i] {
            SqlTok::Punct('(') => {
                depth += 1;
                expect_table = false;
                after_table_ref = false;
            }
            SqlTok::Punct(')') => {
                depth = depth.saturating_sub(1);
                from_depths.retain(|&d| d <= depth);
                expect_table = false;
                after_table_ref = true;
            }
            SqlTok::Punct(',') => {
                if after_table_ref && from_depths.last() == Some(&depth) {
                    expect_table = true;
                    after_table_ref = false;
                }
            }
            SqlTok::Ident(word) => {
                let lower = word.to_ascii_lowercase();
                match lower.as_str() {
                    "from" => {
                        expect_table = true;
                        after_table_ref = false;
                        if from_depths.last() != Some(&depth) {
                            from_depths.push(depth);
                        }
                    }
                    "join" => {
                        expect_table = true;
                        after_table_ref = false;
                    }
                    "as" if after_table_ref => {
                        // consume the alias
                        if let Some(SqlTok::Ident(_)) = toks.get(i + 1) {
                            i += 1;
                        }
                        after_table_ref = true;
                    }
                    _ if expect_table => {
                        let table = schema.resolve_in_db(db_id, word).ok_or_else(|| {
                            SchemaError::UnresolvedTable {
                                table: word.to_string(),
                                db_id: db_id.to_string(),
                            }
                        })?;
                        tables.insert(table.union_name.clone());
                        expect_table = false;
                        after_table_ref = true;
                    }
                    _ => {
                        if after_table_ref && !is_keyword(word) {
                            // implicit alias: FROM t t1
                            after_table_ref = true;
                        } else if is_keyword(word)
                            && !matches!(lower.as_str(), "as" | "join")
                        {
                            after_table_ref = false;
                            if matches!(
                                lower.as_str(),
                                "where" | "group" | "order" | "having" | "limit" | "select"
                            ) {
                                from_depths.retain(|&d| d != depth);
                            }
                        }
                    }
                }
            }
            _ => {
                expect_table = false;
                after_table_ref = false;
            }
        }
        i += 1;
    }
    Ok(tables)
}

/// [`gold_tables_of`] packaged with the question id it belongs to.
pub fn gold_set_for(
    question_id: &str,
    sql: &str,
    schema: &UnionSchema,
    db_id: &str,
) -> Result<GoldSet, SchemaError> {
    Ok(GoldSet {
        question_id: question_id.to_string(),
        tables: gold_tables_of(sql, schema, db_id)?,
    })
}

/// Build a manifest-entry JSON value for tests and ad-hoc schemas.
pub fn manifest_entry_json(
    db_id: &str,
    tables: &[(&str, &[(&str, &str)])],
) -> serde_json::Value {
    let mut table_names = Vec::new();
    let mut column_names = vec![serde_json::json!([-1, "*"])];
    let mut column_types = vec!["text".to_string()];
    for (ti, (tname, cols)) in tables.iter().enumerate() {
        table_names.push(tname.to_string());
        for (cname, ctype) in cols.iter() {
            column_names.push(serde_json::json!([ti as i64, cname]));
            column_types.push(ctype.to_string());
        }
    }
    serde_json::json!({
        "db_id": db_id,
        "table_names_original": table_names,
        "column_names_original": column_names,
        "column_types": column_types,
    })
}

/// Parse manifest JSON already in memory (same shape as the manifest file).
pub fn parse_manifest_json(value: &serde_json::Value) -> Result<Vec<DbSchema>, SchemaError> {
    let raw: Vec<RawManifestEntry> = serde_json::from_value(value.clone())
        .map_err(|e| malformed("json", 0, e.to_string()))?;
    parse_manifest_entries(raw)
}
