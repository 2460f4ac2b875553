//! TOML pipeline configuration.
//!
//! Relative paths are resolved against the directory of the config file.
//! Credentials are never stored in the file; adapters read them from the
//! environment variable named by `api_key_env`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use factcheck_core::evidence::{Blocklist, RankAnchor};
use factcheck_core::providers::CallPolicy;
use factcheck_core::questiongen::{BackendDescriptor, PromptTemplate, SamplingConfig};
use factcheck_core::verification::VoteRule;
use serde::{Deserialize, Serialize};

use crate::cache::CacheMode;
use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// `POST {query, max_results}` returning `[{title, url, snippet}]`.
    Generic,
    Google,
    Bing,
    You,
    Wikipedia,
    SemanticScholar,
}

impl Engine {
    pub fn default_endpoint(self) -> Option<&'static str> {
        match self {
            Self::Generic => None,
            Self::Google => Some("https://www.googleapis.com/customsearch/v1"),
            Self::Bing => Some("https://api.bing.microsoft.com/v7.0/search"),
            Self::You => Some("https://api.ydc-index.io/search"),
            Self::Wikipedia => Some("https://en.wikipedia.org/w/api.php"),
            Self::SemanticScholar => Some("https://api.semanticscholar.org/graph/v1/paper/search"),
        }
    }

    fn needs_key(self) -> bool {
        matches!(self, Self::Google | Self::Bing | Self::You)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchProviderConfig {
    pub name: String,
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Google programmable search engine id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<String>,
    /// Minimum spacing between requests to this provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_interval_ms: Option<u64>,
}

impl SearchProviderConfig {
    pub fn endpoint(&self) -> Option<&str> {
        self.endpoint.as_deref().or(self.engine.default_endpoint())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub id: String,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliConfig {
    pub id: String,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Renames raw service labels (e.g. `LABEL_0 = "contradiction"`) before
    /// they are mapped to stances.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeouts {
    #[serde(default = "default_request_ms")]
    pub request_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            request_ms: default_request_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

impl Timeouts {
    pub fn policy(&self) -> CallPolicy {
        CallPolicy {
            timeout: Duration::from_millis(self.request_ms),
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub mode: CacheMode,
}

fn default_request_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_top_k() -> usize {
    20
}
fn default_questions() -> usize {
    3
}
fn default_max_results() -> usize {
    10
}
fn default_parallelism() -> usize {
    8
}
fn default_embed_batch() -> usize {
    64
}
fn default_nli_batch() -> usize {
    32
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub backends: Vec<BackendDescriptor>,
    #[serde(default)]
    pub search: Vec<SearchProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<EndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nli: Option<NliConfig>,
    /// Extra blocked domains, one per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocklist: Option<PathBuf>,
    /// Include the bundled fact-checker list.
    #[serde(default = "yes")]
    pub default_blocklist: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
    /// Applied to every backend without its own `sampling` table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_questions")]
    pub questions_per_claim: usize,
    #[serde(default = "default_max_results")]
    pub max_results: usize,
    /// Cap on concurrent provider requests and concurrently verified claims.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_embed_batch")]
    pub embed_batch_size: usize,
    #[serde(default = "default_nli_batch")]
    pub nli_batch_size: usize,
    #[serde(default)]
    pub rank_anchor: RankAnchor,
    #[serde(default)]
    pub vote: VoteRule,
    #[serde(default)]
    pub timeouts: Timeouts,
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl PipelineConfig {
    /// Parses, resolves relative paths against `base` and validates.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, AppError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| AppError::validation(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
        Self::from_toml_str(&text, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.blocklist, &mut self.template, &mut self.cache.dir, &mut self.audit_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Validation(format!("config: {m}")));
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        for (name, v) in [
            ("questions_per_claim", self.questions_per_claim),
            ("max_results", self.max_results),
            ("parallelism", self.parallelism),
            ("embed_batch_size", self.embed_batch_size),
            ("nli_batch_size", self.nli_batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.timeouts.request_ms == 0 {
            return bad("timeouts.request_ms must be positive".into());
        }
        for (what, path) in [("blocklist", &self.blocklist), ("template", &self.template)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return bad(format!("{what} file {} does not exist", p.display()));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for b in &self.backends {
            if b.id.trim().is_empty() || !ids.insert(b.id.as_str()) {
                return bad(format!("backend id {:?} is empty or repeated", b.id));
            }
            check_url(&b.endpoint).or_else(|e| bad(format!("backend {}: {e}", b.id)))?;
            if b.timeout_ms == 0 {
                return bad(format!("backend {}: timeout_ms must be positive", b.id));
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.search {
            if s.name.trim().is_empty() || !names.insert(s.name.as_str()) {
                return bad(format!("search provider name {:?} is empty or repeated", s.name));
            }
            match s.endpoint() {
                Some(u) => check_url(u).or_else(|e| bad(format!("search {}: {e}", s.name)))?,
                None => return bad(format!("search {}: engine {:?} needs an endpoint", s.name, s.engine)),
            }
            if s.engine.needs_key() && s.api_key_env.is_none() {
                return bad(format!("search {}: engine {:?} needs api_key_env", s.name, s.engine));
            }
            if s.engine == Engine::Google && s.cx.is_none() {
                return bad(format!("search {}: google needs cx", s.name));
            }
        }
        if let Some(e) = &self.embedder {
            check_url(&e.endpoint).or_else(|m| bad(format!("embedder {}: {m}", e.id)))?;
        }
        if let Some(n) = &self.nli {
            check_url(&n.endpoint).or_else(|m| bad(format!("nli {}: {m}", n.id)))?;
        }
        Ok(())
    }

    pub fn blocklist(&self) -> Result<Blocklist, AppError> {
        let mut list = if self.default_blocklist {
            Blocklist::fact_checkers()
        } else {
            Blocklist::empty()
        };
        if let Some(p) = &self.blocklist {
            list.extend(&Blocklist::load(p).map_err(AppError::Validation)?);
        }
        Ok(list)
    }

    pub fn template(&self) -> Result<PromptTemplate, AppError> {
        match &self.template {
            Some(p) => PromptTemplate::load(p).map_err(AppError::Validation),
            None => Ok(PromptTemplate::default()),
        }
    }

    /// Backend descriptors with the global sampling override applied.
    pub fn backend_descriptors(&self) -> Vec<BackendDescriptor> {
        self.backends
            .iter()
            .cloned()
            .map(|mut b| {
                if b.sampling.is_none() {
                    b.sampling = self.sampling;
                }
                b
            })
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn check_url(s: &str) -> Result<(), String> {
    let u = reqwest::Url::parse(s).map_err(|e| format!("invalid endpoint {s:?}: {e}"))?;
    match u.scheme() {
        "http" | "https" => Ok(()),
        other => Err(format!("unsupported scheme {other:?} in {s:?}")),
    }
}
