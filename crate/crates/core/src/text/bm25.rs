//! Okapi BM25 over a small in-memory corpus, used to prefilter candidate
//! documents before the (much more expensive) embedding comparisons.

use std::collections::HashMap;

use crate::error::TextError;

/// BM25 free parameters. `k1` controls term-frequency saturation, `b`
/// controls document-length normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), TextError> {
        if !self.k1.is_finite() || self.k1 <= 0.0 {
            return Err(TextError::InvalidBm25Params(format!(
                "k1 must be finite and > 0, got {}",
                self.k1
            )));
        }
        if !self.b.is_finite() || !(0.0..=1.0).contains(&self.b) {
            return Err(TextError::InvalidBm25Params(format!(
                "b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Lowercase, split on non-alphanumeric boundaries, and break snake_case and
/// camelCase identifiers into their parts: `"singer_ID"` and `"singerId"`
/// both tokenize to `["singer", "id"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev_lower_or_digit = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if ch.is_uppercase() && prev_lower_or_digit && !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
            prev_lower_or_digit = ch.is_lowercase() || ch.is_numeric();
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            prev_lower_or_digit = false;
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Rank `docs` against `query`, returning at most `top_n` `(doc_id, score)`
/// pairs sorted by score descending. Only documents sharing at least one
/// query term appear; among equal scores the lower doc id wins.
pub fn bm25_rank(
    query: &str,
    docs: &[String],
    params: Bm25Params,
    top_n: usize,
) -> Result<Vec<(usize, f64)>, TextError> {
    params.validate()?;
    let query_terms = tokenize(query);
    if query_terms.is_empty() {
        return Err(TextError::EmptyQuery);
    }
    if docs.is_empty() || top_n == 0 {
        return Ok(Vec::new());
    }

    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d)).collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(|t| t.len() as f64).sum::<f64>() / n;

    // document frequency per distinct query term
    let mut distinct_terms: Vec<&String> = Vec::new();
    for t in &query_terms {
        if !distinct_terms.contains(&t) {
            distinct_terms.push(t);
        }
    }
    let mut idf: HashMap<&str, f64> = HashMap::new();
    for term in &distinct_terms {
        let df = tokenized
            .iter()
            .filter(|toks| toks.iter().any(|t| t == *term))
            .count() as f64;
        // Lucene-style IDF: always positive, even for very common terms.
        idf.insert(term.as_str(), (1.0 + (n - df + 0.5) / (df + 0.5)).ln());
    }

    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (doc_id, toks) in tokenized.iter().enumerate() {
        let dl = toks.len() as f64;
        let mut tf: HashMap<&str, f64> = HashMap::new();
        for t in toks {
            *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        let mut score = 0.0;
        let mut matched = false;
        for term in &query_terms {
            let f = tf.get(term.as_str()).copied().unwrap_or(0.0);
            if f == 0.0 {
                continue;
            }
            matched = true;
            let norm = if avgdl > 0.0 {
                params.k1 * (1.0 - params.b + params.b * dl / avgdl)
            } else {
                params.k1
            };
            score += idf[term.as_str()] * f * (params.k1 + 1.0) / (f + norm);
        }
        if matched {
            scored.push((doc_id, score));
        }
    }

    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(top_n);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_splits_snake_and_camel() {
        assert_eq!(tokenize("singer_ID"), vec!["singer", "id"]);
        assert_eq!(tokenize("singerId"), vec!["singer", "id"]);
        assert_eq!(tokenize("HTTPServer"), vec!["httpserver"]);
        assert_eq!(tokenize("concert in stadium!"), vec!["concert", "in", "stadium"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }

    #[test]
    fn matching_doc_ranks_first() {
        let corpus = docs(&[
            "table concert with columns concert_name stadium_id year",
            "table pets with columns pet_id pet_type pet_age",
            "table stadium with columns stadium_id name capacity",
        ]);
        let ranked = bm25_rank("pet type", &corpus, Bm25Params::default(), 10).unwrap();
        assert_eq!(ranked[0].0, 1);
        // docs without any query term are absent
        assert!(ranked.iter().all(|(id, _)| *id == 1));
    }

    #[test]
    fn only_matching_docs_returned_and_truncated() {
        let corpus = docs(&["stadium name", "stadium capacity", "pet age", "stadium year"]);
        let ranked = bm25_rank("stadium", &corpus, Bm25Params::default(), 2).unwrap();
        assert_eq!(ranked.len(), 2);
        assert!(ranked.iter().all(|(id, _)| *id != 2));
    }

    #[test]
    fn ties_break_by_ascending_doc_id() {
        let corpus = docs(&["alpha beta", "alpha beta", "alpha beta"]);
        let ranked = bm25_rank("alpha", &corpus, Bm25Params::default(), 10).unwrap();
        let ids: Vec<usize> = ranked.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert!((ranked[0].1 - ranked[2].1).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_score_matches() {
        // Two docs, query "cat". df("cat") = 1, N = 2 =>
        // idf = ln(1 + (2 - 1 + 0.5) / (1 + 0.5)) = ln(2).
        // Doc 0 = ["cat", "dog"]: tf = 1, dl = 2, avgdl = 2 =>
        // score = ln(2) * 1 * (k1 + 1) / (1 + k1 * (1 - b + b * 1)) = ln(2) * 2.2 / 2.2 = ln(2).
        let corpus = docs(&["cat dog", "bird fish"]);
        let ranked = bm25_rank("cat", &corpus, Bm25Params::default(), 10).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, 0);
        assert!((ranked[0].1 - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_query_rejected() {
        let corpus = docs(&["a"]);
        assert!(matches!(
            bm25_rank("!!!", &corpus, Bm25Params::default(), 5),
            Err(TextError::EmptyQuery)
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        let corpus = docs(&["a"]);
        let bad_k1 = Bm25Params { k1: 0.0, b: 0.5 };
        assert!(bm25_rank("a", &corpus, bad_k1, 5).is_err());
        let bad_b = Bm25Params { k1: 1.2, b: 1.5 };
        assert!(bm25_rank("a", &corpus, bad_b, 5).is_err());
    }
}
