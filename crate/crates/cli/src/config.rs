//! Layered tool configuration: a TOML file, then `CRED_*` environment
//! variables, then command-line flags, each layer overriding the one below.
//! Unknown keys in the file are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use cred_core::llm::{LlmConfig, LlmMode};
use cred_core::retrieve::{
    DEFAULT_CONTRIBUTION_FLOOR, DEFAULT_PREFILTER_TOP_N, DEFAULT_S1, DEFAULT_STAGE1_M,
};
use cred_core::text::{EmbeddingProvider, HttpEmbedder, TrigramEmbedder};
use serde::Deserialize;

use crate::CliError;

/// Everything the subcommands read. Collected from `[paths]`, `[retrieval]`,
/// `[embedding]` and `[llm]` sections plus two top-level knobs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub paths: PathsConfig,
    pub retrieval: RetrievalConfig,
    pub embedding: EmbeddingConfig,
    pub llm: LlmSection,
    pub parallelism: usize,
    pub timeout_ms: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Schema manifest (Spider-style tables.json).
    pub manifest: Option<PathBuf>,
    /// Serialized retrieval index.
    pub index: Option<PathBuf>,
    /// Recorded chat transcripts for replay/record mode.
    pub fixtures: Option<PathBuf>,
    /// Directory of SQLite files, flat or nested per database id.
    pub databases: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    /// Clustering similarity threshold.
    pub s1: f64,
    /// BM25 prefilter width during clustering; 0 disables the prefilter.
    pub top_n: usize,
    /// Stage-1 shortlist size.
    pub m: usize,
    /// Tables returned by retrieval / handed to selection.
    pub k: usize,
    /// Minimum cosine for a column to contribute to a table's score.
    pub floor: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            s1: DEFAULT_S1,
            top_n: DEFAULT_PREFILTER_TOP_N,
            m: DEFAULT_STAGE1_M,
            k: 10,
            floor: DEFAULT_CONTRIBUTION_FLOOR,
        }
    }
}

impl RetrievalConfig {
    pub fn prefilter(&self) -> Option<usize> {
        if self.top_n == 0 {
            None
        } else {
            Some(self.top_n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Deterministic offline character-trigram embedder.
    #[default]
    Trigram,
    /// OpenAI-compatible `/v1/embeddings` endpoint.
    Http,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub dim: Option<usize>,
}

impl EmbeddingConfig {
    /// Build the configured provider. The HTTP embedder needs `base_url`,
    /// `model` and `dim`.
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, CliError> {
        match self.provider {
            EmbeddingKind::Trigram => Ok(Box::new(TrigramEmbedder)),
            EmbeddingKind::Http => {
                let base_url = self
                    .base_url
                    .as_deref()
                    .ok_or_else(|| config_err("embedding.base_url is required for the http provider"))?;
                let model = self
                    .model
                    .as_deref()
                    .ok_or_else(|| config_err("embedding.model is required for the http provider"))?;
                let dim = self
                    .dim
                    .ok_or_else(|| config_err("embedding.dim is required for the http provider"))?;
                Ok(Box::new(HttpEmbedder::new(base_url, self.api_key.clone(), model, dim)?))
            }
        }
    }
}

/// Transport mode by name; the fixture path comes from `paths.fixtures`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Live,
    Replay,
    Record,
}

/// The `[llm]` section. Mirrors [`LlmConfig`] field-for-field except that the
/// mode is a bare name here so the section stays flat and typo-checked.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSection {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub mode: ModeName,
}

impl Default for LlmSection {
    fn default() -> Self {
        let base = LlmConfig::default();
        Self {
            base_url: base.base_url,
            model: base.model,
            api_key: None,
            temperature: base.temperature,
            max_retries: base.max_retries,
            mode: ModeName::Live,
        }
    }
}

impl CliConfig {
    /// Resolve the `[llm]` section against `paths.fixtures` into the core
    /// config. Replay and record modes require a fixtures path.
    pub fn llm_config(&self) -> Result<LlmConfig, CliError> {
        let mode = match self.llm.mode {
            ModeName::Live => LlmMode::Live,
            ModeName::Replay => LlmMode::Replay(self.fixtures_path("replay")?),
            ModeName::Record => LlmMode::Record(self.fixtures_path("record")?),
        };
        Ok(LlmConfig {
            base_url: self.llm.base_url.clone(),
            model: self.llm.model.clone(),
            api_key: self.llm.api_key.clone(),
            temperature: self.llm.temperature,
            max_retries: self.llm.max_retries,
            mode,
        })
    }

    fn fixtures_path(&self, mode: &str) -> Result<PathBuf, CliError> {
        self.paths
            .fixtures
            .clone()
            .ok_or_else(|| config_err(format!("{mode} mode needs paths.fixtures (or --fixtures)")))
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Load the TOML file when present; a missing optional file means defaults.
pub fn load_config(path: Option<&Path>, explicit: bool) -> Result<CliConfig, CliError> {
    let Some(path) = path else {
        return Ok(CliConfig::default());
    };
    if !path.is_file() {
        if explicit {
            return Err(config_err(format!("config file not found: {}", path.display())));
        }
        return Ok(CliConfig::default());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Apply `CRED_*` environment overrides. The lookup is injected so tests can
/// exercise the layering without mutating the process environment.
pub fn apply_env_overrides(
    config: &mut CliConfig,
    get: impl Fn(&str) -> Option<String>,
) -> Result<(), CliError> {
    fn parse<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse()
            .map_err(|e| config_err(format!("{name}={value}: {e}")))
    }

    if let Some(v) = get("CRED_MANIFEST") {
        config.paths.manifest = Some(PathBuf::from(v));
    }
    if let Some(v) = get("CRED_INDEX") {
        config.paths.index = Some(PathBuf::from(v));
    }
    if let Some(v) = get("CRED_FIXTURES") {
        config.paths.fixtures = Some(PathBuf::from(v));
    }
    if let Some(v) = get("CRED_DATABASES") {
        config.paths.databases = Some(PathBuf::from(v));
    }
    if let Some(v) = get("CRED_S1") {
        config.retrieval.s1 = parse("CRED_S1", &v)?;
    }
    if let Some(v) = get("CRED_TOP_N") {
        config.retrieval.top_n = parse("CRED_TOP_N", &v)?;
    }
    if let Some(v) = get("CRED_M") {
        config.retrieval.m = parse("CRED_M", &v)?;
    }
    if let Some(v) = get("CRED_K") {
        config.retrieval.k = parse("CRED_K", &v)?;
    }
    if let Some(v) = get("CRED_FLOOR") {
        config.retrieval.floor = parse("CRED_FLOOR", &v)?;
    }
    if let Some(v) = get("CRED_LLM_BASE_URL") {
        config.llm.base_url = v;
    }
    if let Some(v) = get("CRED_LLM_MODEL") {
        config.llm.model = v;
    }
    if let Some(v) = get("CRED_LLM_API_KEY") {
        config.llm.api_key = Some(v);
    }
    if let Some(v) = get("CRED_LLM_TEMPERATURE") {
        config.llm.temperature = parse("CRED_LLM_TEMPERATURE", &v)?;
    }
    if let Some(v) = get("CRED_LLM_MAX_RETRIES") {
        config.llm.max_retries = parse("CRED_LLM_MAX_RETRIES", &v)?;
    }
    if let Some(v) = get("CRED_MODE") {
        config.llm.mode = match v.to_ascii_lowercase().as_str() {
            "live" => ModeName::Live,
            "replay" => ModeName::Replay,
            "record" => ModeName::Record,
            other => {
                return Err(config_err(format!(
                    "CRED_MODE={other}: expected live, replay, or record"
                )))
            }
        };
    }
    if let Some(v) = get("CRED_EMBED_PROVIDER") {
        config.embedding.provider = match v.to_ascii_lowercase().as_str() {
            "trigram" => EmbeddingKind::Trigram,
            "http" => EmbeddingKind::Http,
            other => {
                return Err(config_err(format!(
                    "CRED_EMBED_PROVIDER={other}: expected trigram or http"
                )))
            }
        };
    }
    if let Some(v) = get("CRED_EMBED_BASE_URL") {
        config.embedding.base_url = Some(v);
    }
    if let Some(v) = get("CRED_EMBED_MODEL") {
        config.embedding.model = Some(v);
    }
    if let Some(v) = get("CRED_EMBED_API_KEY") {
        config.embedding.api_key = Some(v);
    }
    if let Some(v) = get("CRED_EMBED_DIM") {
        config.embedding.dim = Some(parse("CRED_EMBED_DIM", &v)?);
    }
    if let Some(v) = get("CRED_PARALLELISM") {
        config.parallelism = parse("CRED_PARALLELISM", &v)?;
    }
    if let Some(v) = get("CRED_TIMEOUT_MS") {
        config.timeout_ms = parse("CRED_TIMEOUT_MS", &v)?;
    }
    Ok(())
}

impl CliConfig {
    pub fn manifest_path(&self) -> Result<&Path, CliError> {
        self.paths
            .manifest
            .as_deref()
            .ok_or_else(|| config_err("no schema manifest configured (paths.manifest, CRED_MANIFEST, or --manifest)"))
    }

    pub fn index_path(&self) -> Result<&Path, CliError> {
        self.paths
            .index
            .as_deref()
            .ok_or_else(|| config_err("no index file configured (paths.index, CRED_INDEX, or --index)"))
    }

    pub fn databases_dir(&self) -> Result<&Path, CliError> {
        self.paths
            .databases
            .as_deref()
            .ok_or_else(|| config_err("no database directory configured (paths.databases or CRED_DATABASES)"))
    }
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            paths: PathsConfig::default(),
            retrieval: RetrievalConfig::default(),
            embedding: EmbeddingConfig::default(),
            llm: LlmSection::default(),
            parallelism: 0,
            timeout_ms: cred_core::eval::DEFAULT_TIMEOUT_MS,
        }
    }
}

/// A path named in config must exist before the stage runs.
pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_err(format!("{what} not found: {}", path.display())))
    }
}
