//! Embedding providers: a deterministic character-trigram hasher for offline
//! use, and an HTTP client for OpenAI-compatible `/v1/embeddings` endpoints.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::Deserialize;

use crate::error::TextError;
use crate::text::Vector;

/// Something that can turn text into a unit-norm vector. Implementations must
/// be safe to call from multiple threads.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vector, TextError>;
    fn dim(&self) -> usize;
    /// Identifies the embedder; indexes built with different fingerprints
    /// are not comparable.
    fn fingerprint(&self) -> String;
}

/// Embed one text with the given provider.
pub fn embed_text(text: &str, provider: &dyn EmbeddingProvider) -> Result<Vector, TextError> {
    if text.trim().is_empty() {
        return Err(TextError::EmptyText);
    }
    provider.embed(text)
}

pub const TRIGRAM_DIM: usize = 512;
const TRIGRAM_SEED: u64 = 0x5c5d_1037_9e2f_41c3;

/// Deterministic offline embedder: character trigrams hashed into a
/// fixed-dimension count vector, then L2-normalized. Equal inputs produce
/// bitwise-equal outputs on every platform.
#[derive(Debug, Clone, Default)]
pub struct TrigramEmbedder;

fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn normalize_for_trigrams(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    let mut last_space = true;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                out.push(lower);
            }
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

impl EmbeddingProvider for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<Vector, TextError> {
        let norm = normalize_for_trigrams(text);
        let chars: Vec<char> = norm.chars().collect();
        let mut counts = vec![0.0f64; TRIGRAM_DIM];
        if chars.len() < 3 {
            // degenerate short input: hash what we have
            let mut buf = [0u8; 4];
            for ch in &chars {
                let h = fnv1a64(TRIGRAM_SEED, ch.encode_utf8(&mut buf).as_bytes());
                counts[(h % TRIGRAM_DIM as u64) as usize] += 1.0;
            }
        } else {
            let mut gram = String::with_capacity(12);
            for window in chars.windows(3) {
                gram.clear();
                gram.extend(window);
                let h = fnv1a64(TRIGRAM_SEED, gram.as_bytes());
                counts[(h % TRIGRAM_DIM as u64) as usize] += 1.0;
            }
        }
        Vector::normalized(counts).map_err(|_| TextError::EmptyText)
    }

    fn dim(&self) -> usize {
        TRIGRAM_DIM
    }

    fn fingerprint(&self) -> String {
        format!("trigram-v1-d{TRIGRAM_DIM}-s{TRIGRAM_SEED:x}")
    }
}

/// Client for an OpenAI-compatible `POST {base_url}/v1/embeddings` endpoint.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingsDatum>,
}

#[derive(Deserialize)]
struct EmbeddingsDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str, dim: usize) -> Result<Self, TextError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| TextError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            dim,
        })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vector, TextError> {
        let url = format!("{}/v1/embeddings", self.base_url.trim_end_matches("/v1"));
        let body = serde_json::json!({ "model": self.model, "input": text });
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| TextError::ProviderUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(TextError::ProviderUnavailable(format!(
                "embeddings endpoint returned {}",
                resp.status()
            )));
        }
        let parsed: EmbeddingsResponse = resp
            .json()
            .map_err(|e| TextError::ProviderUnavailable(e.to_string()))?;
        let datum = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| TextError::ProviderUnavailable("empty embeddings response".into()))?;
        Vector::normalized(datum.embedding)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("http-{}-{}", self.base_url, self.model)
    }
}

/// Test provider that trips a flag and fails if anything tries to embed
/// through it. Used to assert that offline paths touch no network.
#[derive(Debug, Default)]
pub struct FailOnConnectEmbedder {
    called: AtomicBool,
}

impl FailOnConnectEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn was_called(&self) -> bool {
        self.called.load(Ordering::SeqCst)
    }
}

impl EmbeddingProvider for FailOnConnectEmbedder {
    fn embed(&self, _text: &str) -> Result<Vector, TextError> {
        self.called.store(true, Ordering::SeqCst);
        Err(TextError::ProviderUnavailable(
            "fail-on-connect provider was invoked".into(),
        ))
    }

    fn dim(&self) -> usize {
        TRIGRAM_DIM
    }

    fn fingerprint(&self) -> String {
        "fail-on-connect".into()
    }
}
