//! Text primitives for retrieval: embedding vectors, cosine similarity,
//! a deterministic offline embedder, and BM25 lexical ranking.

mod bm25;
mod embed;

pub use bm25::{bm25_rank, tokenize, Bm25Params};
pub use embed::{embed_text, EmbeddingProvider, FailOnConnectEmbedder, HttpEmbedder, TrigramEmbedder};

use serde::{Deserialize, Serialize};

use crate::error::TextError;

/// A unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    components: Vec<f64>,
}

impl Vector {
    /// Build a vector from raw components, L2-normalizing them.
    /// Returns `EmptyText` if the norm is zero or any component is non-finite.
    pub fn normalized(components: Vec<f64>) -> Result<Self, TextError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(TextError::EmptyText);
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(TextError::EmptyText);
        }
        Ok(Self {
            components: components.into_iter().map(|c| c / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Squared Euclidean distance, used for nearest-centroid assignment.
    pub fn sq_dist(&self, other: &Vector) -> Result<f64, TextError> {
        if self.dim() != other.dim() {
            return Err(TextError::DimMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

/// Inner product of two unit vectors. Symmetric by construction.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, TextError> {
    if u.dim() != v.dim() {
        return Err(TextError::DimMismatch(u.dim(), v.dim()));
    }
    Ok(u.components
        .iter()
        .zip(&v.components)
        .map(|(a, b)| a * b)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(components: &[f64]) -> Vector {
        Vector::normalized(components.to_vec()).unwrap()
    }

    #[test]
    fn cosine_self_is_one() {
        let v = unit(&[0.3, 0.4, 1.2]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_orthogonal_is_zero() {
        let u = unit(&[1.0, 0.0]);
        let v = unit(&[0.0, 1.0]);
        assert_eq!(cosine(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_arithmetic() {
        let u = unit(&[0.6, 0.8]);
        let v = unit(&[1.0, 0.0]);
        assert!((cosine(&u, &v).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cosine_symmetry_exact() {
        let u = unit(&[0.12, -3.4, 2.2, 0.01]);
        let v = unit(&[1.7, 0.3, -0.9, 4.4]);
        assert_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap());
    }

    #[test]
    fn dim_mismatch_rejected() {
        let u = unit(&[1.0, 0.0]);
        let v = unit(&[1.0, 0.0, 0.0]);
        assert!(matches!(cosine(&u, &v), Err(TextError::DimMismatch(2, 3))));
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(Vector::normalized(vec![0.0, 0.0]).is_err());
    }
}
