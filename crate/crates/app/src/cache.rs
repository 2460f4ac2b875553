//! On-disk cache of provider responses.
//!
//! An entry's key is the SHA-256 of the canonical JSON of
//! `{kind, provider, request}` (object keys sorted). Entries are written
//! once and never modified. Unreadable entries are treated as misses.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use async_trait::async_trait;
use factcheck_core::providers::{
    Embedder, GenerationRequest, Generator, NliPair, NliPrediction, NliProvider, ProviderError, SearchHit,
    SearchProvider, SearchRequest,
};
use factcheck_core::text::normalize_whitespace;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Serve hits, call and store on misses.
    #[default]
    ReadWrite,
    /// Never read or write; every request goes to the provider.
    Bypass,
    /// Serve hits; misses fail without any network I/O.
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Generation,
    Search,
    Embedding,
    Nli,
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Generation => "generation",
            Self::Search => "search",
            Self::Embedding => "embedding",
            Self::Nli => "nli",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub kind: InterfaceKind,
    pub provider: String,
    pub request: Value,
    pub response: Value,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    /// Requests that reached the underlying provider.
    pub live_calls: usize,
    pub writes: usize,
    pub corrupt: usize,
}

#[derive(Debug, Default)]
struct Counters {
    hits: AtomicUsize,
    misses: AtomicUsize,
    live_calls: AtomicUsize,
    writes: AtomicUsize,
    corrupt: AtomicUsize,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mode: CacheMode,
    counters: Counters,
}

/// Canonical key for a request. `serde_json` maps keep keys sorted, so the
/// serialization is independent of field order.
pub fn cache_key(kind: InterfaceKind, provider: &str, request: &Value) -> String {
    let canonical = json!({ "kind": kind, "provider": provider, "request": request });
    let bytes = serde_json::to_vec(&canonical).expect("json value serializes");
    hex::encode(Sha256::digest(&bytes))
}

impl ResponseCache {
    /// `dir = None` disables storage; with `Offline` every call then fails.
    pub fn new(dir: Option<PathBuf>, mode: CacheMode) -> Self {
        Self {
            dir,
            mode,
            counters: Counters::default(),
        }
    }

    pub fn disabled() -> Self {
        Self::new(None, CacheMode::Bypass)
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn stats(&self) -> CacheStats {
        let c = &self.counters;
        CacheStats {
            hits: c.hits.load(Ordering::Relaxed),
            misses: c.misses.load(Ordering::Relaxed),
            live_calls: c.live_calls.load(Ordering::Relaxed),
            writes: c.writes.load(Ordering::Relaxed),
            corrupt: c.corrupt.load(Ordering::Relaxed),
        }
    }

    fn entry_path(&self, kind: InterfaceKind, key: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(kind.to_string()).join(&key[..2]).join(format!("{key}.json")))
    }

    fn read(path: &Path, kind: InterfaceKind, key: &str) -> Result<Option<Value>, String> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(format!("unreadable: {e}")),
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.key == key && entry.kind == kind => Ok(Some(entry.response)),
            Ok(_) => Err("entry does not match its key".into()),
            Err(e) => Err(format!("corrupt: {e}")),
        }
    }

    /// Looks up a stored response. Corrupt or mismatched entries are logged
    /// and reported as misses.
    pub fn get(&self, kind: InterfaceKind, key: &str) -> Option<Value> {
        let path = self.entry_path(kind, key)?;
        Self::read(&path, kind, key).unwrap_or_else(|e| {
            tracing::warn!(path = %path.display(), error = %e, "ignoring cache entry");
            self.counters.corrupt.fetch_add(1, Ordering::Relaxed);
            None
        })
    }

    /// Stores an entry unless a valid one already exists. Writes go to a
    /// temporary file first so readers never see partial entries.
    pub fn put(&self, kind: InterfaceKind, provider: &str, key: &str, request: Value, response: Value) -> std::io::Result<()> {
        let Some(path) = self.entry_path(kind, key) else {
            return Ok(());
        };
        if matches!(Self::read(&path, kind, key), Ok(Some(_))) {
            return Ok(());
        }
        let entry = CacheEntry {
            key: key.to_string(),
            kind,
            provider: provider.to_string(),
            request,
            response,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let dir = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(dir)?;
        let tmp = tempfile_in(dir, key);
        std::fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        std::fs::rename(&tmp, &path)?;
        self.counters.writes.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Serves `request` from the cache or through `live`, according to the
    /// mode.
    pub async fn fetch<T, F, Fut>(&self, kind: InterfaceKind, provider: &str, request: Value, live: F) -> Result<T, ProviderError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Fut,
        Fut: std::future::Future<Output = Result<T, ProviderError>>,
    {
        let key = cache_key(kind, provider, &request);
        if self.mode != CacheMode::Bypass {
            if let Some(v) = self.get(kind, &key) {
                match serde_json::from_value::<T>(v) {
                    Ok(t) => {
                        self.counters.hits.fetch_add(1, Ordering::Relaxed);
                        return Ok(t);
                    }
                    Err(e) => {
                        tracing::warn!(%kind, provider, error = %e, "cached response has the wrong shape; ignoring");
                        self.counters.corrupt.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
            self.counters.misses.fetch_add(1, Ordering::Relaxed);
        }
        if self.mode == CacheMode::Offline {
            return Err(ProviderError::Offline {
                provider: provider.to_string(),
            });
        }
        self.counters.live_calls.fetch_add(1, Ordering::Relaxed);
        let value = live().await?;
        if self.mode == CacheMode::ReadWrite {
            let response = serde_json::to_value(&value).expect("response serializes");
            if let Err(e) = self.put(kind, provider, &key, request, response) {
                tracing::warn!(%kind, provider, error = %e, "could not write cache entry");
            }
        }
        Ok(value)
    }
}

fn tempfile_in(dir: &Path, key: &str) -> PathBuf {
    static SEQ: AtomicUsize = AtomicUsize::new(0);
    let n = SEQ.fetch_add(1, Ordering::Relaxed);
    dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()))
}

pub struct CachedGenerator {
    inner: Arc<dyn Generator>,
    cache: Arc<ResponseCache>,
}

impl CachedGenerator {
    pub fn new(inner: Arc<dyn Generator>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

#[async_trait]
impl Generator for CachedGenerator {
    fn id(&self) -> &str {
        self.inner.id()
    }

    async fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        // prompts are kept verbatim: layout is part of the model input
        let key = serde_json::to_value(request).expect("request serializes");
        self.cache
            .fetch(InterfaceKind::Generation, self.inner.id(), key, || self.inner.generate(request))
            .await
    }
}

pub struct CachedSearch {
    inner: Arc<dyn SearchProvider>,
    cache: Arc<ResponseCache>,
}

impl CachedSearch {
    pub fn new(inner: Arc<dyn SearchProvider>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

#[async_trait]
impl SearchProvider for CachedSearch {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        let key = json!({ "query": normalize_whitespace(&request.query), "max_results": request.max_results });
        self.cache
            .fetch(InterfaceKind::Search, self.inner.name(), key, || self.inner.search(request))
            .await
    }
}

/// Caches one entry per text so batches of different composition share
/// entries.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: Arc<ResponseCache>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

#[async_trait]
impl Embedder for CachedEmbedder {
    fn id(&self) -> &str {
        self.inner.id()
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let id = self.inner.id();
        let keys: Vec<Value> = texts.iter().map(|t| json!({ "text": normalize_whitespace(t) })).collect();
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut missing = Vec::new();
        if self.cache.mode() != CacheMode::Bypass {
            for (i, k) in keys.iter().enumerate() {
                let key = cache_key(InterfaceKind::Embedding, id, k);
                match self.cache.get(InterfaceKind::Embedding, &key).map(serde_json::from_value::<Vec<f64>>) {
                    Some(Ok(v)) => {
                        self.cache.counters.hits.fetch_add(1, Ordering::Relaxed);
                        out[i] = Some(v);
                    }
                    _ => {
                        self.cache.counters.misses.fetch_add(1, Ordering::Relaxed);
                        missing.push(i);
                    }
                }
            }
        } else {
            missing = (0..texts.len()).collect();
        }
        if !missing.is_empty() {
            if self.cache.mode() == CacheMode::Offline {
                return Err(ProviderError::Offline { provider: id.to_string() });
            }
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            self.cache.counters.live_calls.fetch_add(1, Ordering::Relaxed);
            let vectors = self.inner.embed(&batch).await?;
            if vectors.len() != batch.len() {
                return Err(ProviderError::protocol(
                    id,
                    format!("{} vectors for {} texts", vectors.len(), batch.len()),
                ));
            }
            for (&i, v) in missing.iter().zip(vectors) {
                if self.cache.mode() == CacheMode::ReadWrite {
                    let key = cache_key(InterfaceKind::Embedding, id, &keys[i]);
                    let value = serde_json::to_value(&v).expect("vector serializes");
                    if let Err(e) = self.cache.put(InterfaceKind::Embedding, id, &key, keys[i].clone(), value) {
                        tracing::warn!(provider = id, error = %e, "could not write cache entry");
                    }
                }
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}

pub struct CachedNli {
    inner: Arc<dyn NliProvider>,
    cache: Arc<ResponseCache>,
}

impl CachedNli {
    pub fn new(inner: Arc<dyn NliProvider>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

#[async_trait]
impl NliProvider for CachedNli {
    fn id(&self) -> &str {
        self.inner.id()
    }

    async fn classify(&self, pairs: &[NliPair]) -> Result<Vec<NliPrediction>, ProviderError> {
        let key = Value::Array(
            pairs
                .iter()
                .map(|p| json!({ "premise": normalize_whitespace(&p.premise), "hypothesis": normalize_whitespace(&p.hypothesis) }))
                .collect(),
        );
        self.cache
            .fetch(InterfaceKind::Nli, self.inner.id(), key, || self.inner.classify(pairs))
            .await
    }
}
