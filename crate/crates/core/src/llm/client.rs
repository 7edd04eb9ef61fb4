//! Chat-completion transports: a live client for OpenAI-compatible
//! `/v1/chat/completions` endpoints, a deterministic fixture replayer, and a
//! record-through wrapper that captures live transcripts into fixtures.
//!
//! Every request is identified by the SHA-256 of its canonical JSON
//! encoding, so a fixture recorded once replays byte-identically as long as
//! the prompts, model name and temperature stay the same.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

/// One chat-completion request. Hashing the canonical JSON of this struct
/// (field order as declared) keys the fixture lookup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

/// Hex SHA-256 of the request's canonical JSON encoding.
pub fn request_hash(request: &ChatRequest) -> String {
    let canonical = serde_json::to_string(request).expect("chat requests serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// A chat-completion backend. Implementations must be callable from
/// multiple threads; the pipeline shares one client across questions.
pub trait ChatApi: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

// ---------------------------------------------------------------------------
// live HTTP client
// ---------------------------------------------------------------------------

/// Client for `POST {base_url}/v1/chat/completions`.
pub struct HttpChatClient {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

impl HttpChatClient {
    pub fn new(base_url: &str, api_key: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::LlmUnavailable(e.to_string()))?;
        Ok(Self { client, base_url: base_url.trim_end_matches('/').to_string(), api_key })
    }
}

impl ChatApi for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let url = format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches("/v1")
        );
        let mut req = self.client.post(&url).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::LlmUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LlmError::LlmUnavailable(format!(
                "chat endpoint returned {}",
                resp.status()
            )));
        }
        let parsed: ChatResponse =
            resp.json().map_err(|e| LlmError::LlmUnavailable(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::LlmUnavailable("empty choices in chat response".into()))
    }
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

/// One recorded exchange: the request's hash and the raw response text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request_hash: String,
    pub response_text: String,
}

pub fn load_fixture(path: &Path) -> Result<Vec<FixtureEntry>, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::FixtureIo(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LlmError::FixtureIo(format!("{}: {e}", path.display())))
}

pub fn save_fixture(path: &Path, entries: &[FixtureEntry]) -> Result<(), LlmError> {
    let mut text = serde_json::to_string_pretty(entries)
        .map_err(|e| LlmError::FixtureIo(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| LlmError::FixtureIo(format!("{}: {e}", path.display())))
}

/// Serves responses from a recorded fixture; never opens a connection. A
/// request whose hash is absent is a hard error, so drifting prompts fail
/// loudly instead of silently going live.
pub struct ReplayClient {
    entries: BTreeMap<String, String>,
}

impl ReplayClient {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let entries = load_fixture(path)?
            .into_iter()
            .map(|e| (e.request_hash, e.response_text))
            .collect();
        Ok(Self { entries })
    }
}

impl ChatApi for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let hash = request_hash(request);
        self.entries
            .get(&hash)
            .cloned()
            .ok_or(LlmError::FixtureMiss(hash))
    }
}

/// Forwards to the live endpoint and writes every new exchange into the
/// fixture file, so a later replay run needs no network. Requests already
/// present in the fixture are answered from it, making re-recording
/// idempotent.
pub struct RecordingClient {
    inner: HttpChatClient,
    path: PathBuf,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl RecordingClient {
    pub fn open(base_url: &str, api_key: Option<String>, path: &Path) -> Result<Self, LlmError> {
        let entries = if path.exists() { load_fixture(path)? } else { Vec::new() };
        Ok(Self {
            inner: HttpChatClient::new(base_url, api_key)?,
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
        })
    }
}

impl ChatApi for RecordingClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let hash = request_hash(request);
        {
            let entries = self.entries.lock().expect("fixture lock");
            if let Some(hit) = entries.iter().find(|e| e.request_hash == hash) {
                return Ok(hit.response_text.clone());
            }
        }
        let response = self.inner.complete(request)?;
        let mut entries = self.entries.lock().expect("fixture lock");
        entries.push(FixtureEntry { request_hash: hash, response_text: response.clone() });
        save_fixture(&self.path, &entries)?;
        Ok(response)
    }
}

// ---------------------------------------------------------------------------
// test doubles
// ---------------------------------------------------------------------------

/// Trips a flag and fails if anything completes through it. Offline paths
/// are asserted by running them against this client.
#[derive(Debug, Default)]
pub struct FailOnConnectChat {
    called: AtomicBool,
}

impl FailOnConnectChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn was_called(&self) -> bool {
        self.called.load(Ordering::SeqCst)
    }
}

impl ChatApi for FailOnConnectChat {
    fn complete(&self, _request: &ChatRequest) -> Result<String, LlmError> {
        self.called.store(true, Ordering::SeqCst);
        Err(LlmError::LlmUnavailable(
            "fail-on-connect chat client was invoked".into(),
        ))
    }
}

/// Returns queued responses in order, recording each request as it goes;
/// for exercising parse-repair loops without fixtures.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    responses: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Every request completed so far, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("request log lock").clone()
    }
}

impl ChatApi for ScriptedChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.requests.lock().expect("request log lock").push(request.clone());
        self.responses
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| LlmError::LlmUnavailable("scripted responses exhausted".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(content: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage::user(content)],
        }
    }

    #[test]
    fn equal_requests_hash_equal_and_distinct_requests_differ() {
        let a = request_hash(&request("hello"));
        let b = request_hash(&request("hello"));
        let c = request_hash(&request("other"));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64, "hex sha-256");
    }

    #[test]
    fn fixture_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.json");
        let entries = vec![
            FixtureEntry { request_hash: "aa".into(), response_text: "one".into() },
            FixtureEntry { request_hash: "bb".into(), response_text: "two".into() },
        ];
        save_fixture(&path, &entries).unwrap();
        assert_eq!(load_fixture(&path).unwrap(), entries);
    }

    #[test]
    fn replay_serves_recorded_response_and_misses_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.json");
        let req = request("what tables?");
        save_fixture(
            &path,
            &[FixtureEntry {
                request_hash: request_hash(&req),
                response_text: "these tables".into(),
            }],
        )
        .unwrap();
        let client = ReplayClient::open(&path).unwrap();
        assert_eq!(client.complete(&req).unwrap(), "these tables");
        match client.complete(&request("unrecorded")) {
            Err(LlmError::FixtureMiss(_)) => {}
            other => panic!("expected FixtureMiss, got {other:?}"),
        }
    }

    #[test]
    fn fail_on_connect_trips_its_flag() {
        let client = FailOnConnectChat::new();
        assert!(!client.was_called());
        assert!(client.complete(&request("x")).is_err());
        assert!(client.was_called());
    }

    #[test]
    fn scripted_responses_in_order_then_exhausted() {
        let client = ScriptedChat::new(["first", "second"]);
        assert_eq!(client.complete(&request("a")).unwrap(), "first");
        assert_eq!(client.complete(&request("b")).unwrap(), "second");
        assert!(matches!(
            client.complete(&request("c")),
            Err(LlmError::LlmUnavailable(_))
        ));
        assert_eq!(client.requests().len(), 3);
    }
}
