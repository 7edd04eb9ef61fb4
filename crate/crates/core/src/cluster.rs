//! Online threshold clustering of schema columns.
//!
//! Columns are processed in input order. Each new column is compared against
//! every previously visited column; among the visited columns whose cosine
//! similarity exceeds the threshold `s1`, it joins the cluster that appears
//! most often (lowest cluster id on ties) and that cluster's size grows by
//! one. If no visited column clears the threshold, the column opens a new
//! cluster of size 1. An optional BM25 prefilter restricts the comparison to
//! the lexically closest visited columns, which cuts the quadratic embedding
//! work on large schemas without changing the algorithm's shape.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::ClusterError;
use crate::text::{bm25_rank, cosine, tokenize, Bm25Params, Vector};

/// One column entering the clustering pass: a stable identifier, the text the
/// BM25 prefilter matches against (typically "name: description"), and the
/// unit-norm embedding the similarity threshold applies to.
#[derive(Debug, Clone)]
pub struct ColumnInput {
    pub uuid: String,
    pub text: String,
    pub vector: Vector,
}

/// Record of a single column's clustering decision, in processing order.
/// `cluster_size_at_assignment` is the cluster's size just after the column
/// joined (1 when the column opened the cluster).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub column_uuid: String,
    pub cluster_id: usize,
    pub cluster_size_at_assignment: usize,
}

/// Final clustering: uuid → cluster id, cluster id → final size, plus the
/// per-column trace. Retrieval weights use the final sizes, not the running
/// sizes recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub assignments: BTreeMap<String, usize>,
    pub sizes: BTreeMap<usize, usize>,
    pub threshold_s1: f64,
    pub cluster_count: usize,
    pub trace: Vec<ClusterAssignment>,
}

impl ClusterTable {
    pub fn empty(s1: f64) -> Self {
        Self {
            assignments: BTreeMap::new(),
            sizes: BTreeMap::new(),
            threshold_s1: s1,
            cluster_count: 0,
            trace: Vec::new(),
        }
    }

    /// Final size of the cluster the given column belongs to.
    pub fn size_of_column(&self, uuid: &str) -> Option<usize> {
        self.assignments.get(uuid).map(|cid| self.sizes[cid])
    }
}

/// Retrieval weight of a column in a cluster of `size` members: 1/size, so a
/// column carrying redundant signal (big cluster) counts for less.
pub fn cluster_weight(size: usize) -> Result<f64, ClusterError> {
    if size == 0 {
        return Err(ClusterError::ZeroSize);
    }
    Ok(1.0 / size as f64)
}

/// Index of the centroid nearest to `v` by squared Euclidean distance, ties
/// broken toward the smallest index.
pub fn assign_nearest_centroid(v: &Vector, centroids: &[Vector]) -> Result<usize, ClusterError> {
    if centroids.is_empty() {
        return Err(ClusterError::EmptyCentroids);
    }
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (idx, c) in centroids.iter().enumerate() {
        let d = v
            .sq_dist(c)
            .map_err(|_| ClusterError::DimMismatch(v.dim(), c.dim()))?;
        if d < best_dist {
            best_dist = d;
            best = idx;
        }
    }
    Ok(best)
}

/// Cluster `columns` in input order with similarity threshold `s1`.
///
/// `prefilter_top_n = Some(n)` restricts each column's comparisons to the
/// `n` visited columns ranked highest by BM25 on `text` (visited columns
/// sharing no token are never compared); `None` compares against every
/// visited column, reproducing the plain quadratic loop. Results are
/// deterministic for a fixed input order.
pub fn cluster_columns(
    columns: &[ColumnInput],
    s1: f64,
    prefilter_top_n: Option<usize>,
) -> Result<ClusterTable, ClusterError> {
    if !s1.is_finite() || s1 <= 0.0 || s1 >= 1.0 {
        return Err(ClusterError::InvalidThreshold(s1));
    }
    let mut seen = HashSet::with_capacity(columns.len());
    for c in columns {
        if !seen.insert(c.uuid.as_str()) {
            return Err(ClusterError::DuplicateUuid(c.uuid.clone()));
        }
    }

    let mut table = ClusterTable::empty(s1);
    let mut current_max_cat = 0usize;
    // cluster id of each visited column, in processing order
    let mut visited_cluster: Vec<usize> = Vec::with_capacity(columns.len());
    let mut visited_texts: Vec<String> = Vec::with_capacity(columns.len());

    for (i, col) in columns.iter().enumerate() {
        let candidate_indices: Vec<usize> = match prefilter_top_n {
            Some(top_n) if i > 0 && !tokenize(&col.text).is_empty() => {
                bm25_rank(&col.text, &visited_texts, Bm25Params::default(), top_n)
                    .map_err(|e| ClusterError::Prefilter(e.to_string()))?
                    .into_iter()
                    .map(|(doc_id, _)| doc_id)
                    .collect()
            }
            _ => (0..i).collect(),
        };

        // count, per cluster, how many candidate columns clear the threshold
        let mut votes: HashMap<usize, usize> = HashMap::new();
        for &j in &candidate_indices {
            let sim = cosine(&col.vector, &columns[j].vector)
                .map_err(|_| ClusterError::DimMismatch(col.vector.dim(), columns[j].vector.dim()))?;
            if sim > s1 {
                *votes.entry(visited_cluster[j]).or_insert(0) += 1;
            }
        }

        let (cluster_id, size_after) = if votes.is_empty() {
            let id = current_max_cat;
            current_max_cat += 1;
            table.sizes.insert(id, 1);
            (id, 1)
        } else {
            // most votes wins; equal votes go to the lowest cluster id
            let (&id, _) = votes
                .iter()
                .max_by(|(ida, va), (idb, vb)| va.cmp(vb).then(idb.cmp(ida)))
                .expect("votes non-empty");
            let size = table.sizes.get_mut(&id).expect("joined cluster exists");
            *size += 1;
            (id, *size)
        };

        table.assignments.insert(col.uuid.clone(), cluster_id);
        table.trace.push(ClusterAssignment {
            column_uuid: col.uuid.clone(),
            cluster_id,
            cluster_size_at_assignment: size_after,
        });
        visited_cluster.push(cluster_id);
        visited_texts.push(col.text.clone());
    }

    table.cluster_count = current_max_cat;
    Ok(table)
}
