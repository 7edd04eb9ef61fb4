//! Dual schema index (table descriptions + clustered columns) and two-stage
//! table retrieval.
//!
//! Stage 1 shortlists `m` tables by cosine similarity between the question
//! and each table description. Stage 2 re-scores the shortlist: a table's
//! total is its own description similarity plus the sum of its columns'
//! similarities, each weighted by the reciprocal of the column's cluster
//! size, so signal that recurs across the schema (ids, names, dates) counts
//! for less than signal unique to one table. Columns below a similarity
//! floor are left out of the sum entirely.

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_columns, ClusterTable, ColumnInput};
use crate::error::RetrieveError;
use crate::schema::{GoldSet, UnionSchema};
use crate::text::{cosine, embed_text, EmbeddingProvider, Vector};

/// Similarity threshold for the column clustering pass.
pub const DEFAULT_S1: f64 = 0.5;
/// BM25 prefilter width used while clustering.
pub const DEFAULT_PREFILTER_TOP_N: usize = 50;
/// Stage-1 shortlist size.
pub const DEFAULT_STAGE1_M: usize = 50;
/// Minimum cosine a column needs to enter a table's score. A floor of −1
/// admits every column (the unfloored weighted sum).
pub const DEFAULT_CONTRIBUTION_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableIndexEntry {
    pub embedding: Vector,
    pub table_name: String,
    pub table_description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnIndexEntry {
    pub embedding: Vector,
    pub cluster_id: usize,
    /// Final size of the column's cluster; its retrieval weight is the
    /// reciprocal of this.
    pub cluster_size: usize,
    pub name: String,
    pub description: String,
    /// union_name of the owning table.
    pub table: String,
}

/// The retrieval index over one union schema. Indexes built with different
/// embedders are not comparable; `provider_fingerprint` records which one
/// produced the vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaIndex {
    pub tables: Vec<TableIndexEntry>,
    pub columns: Vec<ColumnIndexEntry>,
    pub cluster_table: ClusterTable,
    pub provider_fingerprint: String,
}

impl SchemaIndex {
    pub fn table_entry(&self, union_name: &str) -> Option<&TableIndexEntry> {
        self.tables.iter().find(|t| t.table_name == union_name)
    }

    fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<(), RetrieveError> {
        let fp = provider.fingerprint();
        if fp != self.provider_fingerprint {
            return Err(RetrieveError::ProviderMismatch {
                index: self.provider_fingerprint.clone(),
                provider: fp,
            });
        }
        Ok(())
    }
}

/// A table's stage-2 score, decomposed. `total` is always exactly
/// `table_score + column_score_sum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTable {
    pub table_name: String,
    pub table_score: f64,
    /// Σ cosine(question, column) / cluster_size over contributing columns.
    pub column_score_sum: f64,
    pub total: f64,
}

/// Build the dual index: one entry per table (description embedded) and one
/// per column, with cluster ids and final cluster sizes from a clustering
/// pass over every column's "name: description" text. Uses the default BM25
/// prefilter width; see [`build_index_with`] to control or disable it.
pub fn build_index(
    schema: &UnionSchema,
    provider: &dyn EmbeddingProvider,
    s1: f64,
) -> Result<SchemaIndex, RetrieveError> {
    build_index_with(schema, provider, s1, Some(DEFAULT_PREFILTER_TOP_N))
}

/// [`build_index`] with an explicit clustering prefilter: `Some(n)` compares
/// each column only against its `n` closest visited columns by BM25, `None`
/// compares against all of them.
pub fn build_index_with(
    schema: &UnionSchema,
    provider: &dyn EmbeddingProvider,
    s1: f64,
    prefilter_top_n: Option<usize>,
) -> Result<SchemaIndex, RetrieveError> {
    if schema.tables.is_empty() {
        return Err(RetrieveError::EmptySchema);
    }

    let mut table_entries = Vec::with_capacity(schema.table_count);
    let mut column_inputs = Vec::with_capacity(schema.column_count);
    for table in &schema.tables {
        table_entries.push(TableIndexEntry {
            embedding: embed_text(&table.description, provider)?,
            table_name: table.union_name.clone(),
            table_description: table.description.clone(),
        });
        for col in &table.columns {
            column_inputs.push(ColumnInput {
                uuid: format!("{}.{}", col.table_key, col.name),
                text: format!("{}: {}", col.name, col.description),
                vector: embed_text(&format!("{}: {}", col.name, col.description), provider)?,
            });
        }
    }

    let cluster_table = cluster_columns(&column_inputs, s1, prefilter_top_n)?;

    let mut column_entries = Vec::with_capacity(column_inputs.len());
    let mut input_iter = column_inputs.into_iter();
    for table in &schema.tables {
        for col in &table.columns {
            let input = input_iter.next().expect("one input per column");
            let cluster_id = cluster_table.assignments[&input.uuid];
            column_entries.push(ColumnIndexEntry {
                embedding: input.vector,
                cluster_id,
                cluster_size: cluster_table.sizes[&cluster_id],
                name: col.name.clone(),
                description: col.description.clone(),
                table: table.union_name.clone(),
            });
        }
    }

    Ok(SchemaIndex {
        tables: table_entries,
        columns: column_entries,
        cluster_table,
        provider_fingerprint: provider.fingerprint(),
    })
}

/// Stage 1: the top-`m` tables by cosine between the question and each table
/// description, ties broken by ascending table name.
pub fn retrieve_candidates(
    question: &str,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    m: usize,
) -> Result<Vec<String>, RetrieveError> {
    if question.trim().is_empty() {
        return Err(RetrieveError::EmptyQuestion);
    }
    index.check_provider(provider)?;
    let qvec = embed_text(question, provider)?;
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(index.tables.len());
    for entry in &index.tables {
        scored.push((cosine(&qvec, &entry.embedding)?, entry.table_name.as_str()));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(b.1))
    });
    Ok(scored.into_iter().take(m).map(|(_, name)| name.to_string()).collect())
}

/// Stage-2 score of one table against an already-embedded question.
pub fn score_table_vec(
    qvec: &Vector,
    table_name: &str,
    index: &SchemaIndex,
    floor: f64,
) -> Result<ScoredTable, RetrieveError> {
    let entry = index
        .table_entry(table_name)
        .ok_or_else(|| RetrieveError::UnknownTable(table_name.to_string()))?;
    let table_score = cosine(qvec, &entry.embedding)?;
    let mut column_score_sum = 0.0;
    for col in index.columns.iter().filter(|c| c.table == table_name) {
        let sim = cosine(qvec, &col.embedding)?;
        if sim >= floor {
            column_score_sum += sim / col.cluster_size as f64;
        }
    }
    Ok(ScoredTable {
        table_name: table_name.to_string(),
        table_score,
        column_score_sum,
        total: table_score + column_score_sum,
    })
}

/// Stage-2 score of one table: description similarity plus the cluster-
/// weighted sum of its columns' similarities at or above `floor`.
pub fn score_table(
    question: &str,
    table_name: &str,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    floor: f64,
) -> Result<ScoredTable, RetrieveError> {
    if question.trim().is_empty() {
        return Err(RetrieveError::EmptyQuestion);
    }
    index.check_provider(provider)?;
    let qvec = embed_text(question, provider)?;
    score_table_vec(&qvec, table_name, index, floor)
}

/// Two-stage retrieval: shortlist `m` tables by description similarity, then
/// re-rank the shortlist by the weighted total, descending, ties by
/// ascending table name. Returns at most `k` entries. The question is
/// embedded once and reused by both stages.
pub fn rank_tables(
    question: &str,
    index: &SchemaIndex,
    provider: &dyn EmbeddingProvider,
    m: usize,
    k: usize,
    floor: f64,
) -> Result<Vec<ScoredTable>, RetrieveError> {
    if k == 0 {
        return Err(RetrieveError::InvalidK);
    }
    if k > m {
        return Err(RetrieveError::KExceedsM { k, m });
    }
    if question.trim().is_empty() {
        return Err(RetrieveError::EmptyQuestion);
    }
    index.check_provider(provider)?;
    let qvec = embed_text(question, provider)?;

    let mut stage1: Vec<(f64, &str)> = Vec::with_capacity(index.tables.len());
    for entry in &index.tables {
        stage1.push((cosine(&qvec, &entry.embedding)?, entry.table_name.as_str()));
    }
    stage1.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(b.1))
    });
    stage1.truncate(m);

    let mut scored: Vec<ScoredTable> = stage1
        .into_iter()
        .map(|(_, name)| score_table_vec(&qvec, name, index, floor))
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.table_name.cmp(&b.table_name))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Fraction of gold tables present in the top `k` of `ranked`.
pub fn recall_at_k(ranked: &[String], gold: &GoldSet, k: usize) -> Result<f64, RetrieveError> {
    if k == 0 {
        return Err(RetrieveError::InvalidK);
    }
    if gold.tables.is_empty() {
        return Err(RetrieveError::EmptyGold);
    }
    let top_k = &ranked[..ranked.len().min(k)];
    let hits = gold.tables.iter().filter(|g| top_k.contains(g)).count();
    Ok(hits as f64 / gold.tables.len() as f64)
}
