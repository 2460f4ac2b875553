//! Deterministic in-process providers for tests, fixtures and offline demos.
//!
//! Every scripted provider answers from a pure function of its request, so
//! results do not depend on call order or concurrency. Each one counts the
//! calls it receives.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;

use crate::providers::{
    Embedder, GenerationRequest, Generator, NliPair, NliPrediction, NliProvider, ProviderError,
    SearchHit, SearchProvider, SearchRequest,
};

type GenFn = dyn Fn(&GenerationRequest) -> Result<String, ProviderError> + Send + Sync;

pub struct ScriptedGenerator {
    id: String,
    respond: Arc<GenFn>,
    calls: AtomicUsize,
}

impl ScriptedGenerator {
    pub fn from_fn<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&GenerationRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            respond: Arc::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Sample `i` of every prompt gets `script[i % len]`.
    pub fn sequence(id: impl Into<String>, script: Vec<&str>) -> Self {
        let id = id.into();
        let script: Vec<String> = script.into_iter().map(str::to_string).collect();
        let pid = id.clone();
        Self::from_fn(id, move |req| {
            if script.is_empty() {
                return Err(ProviderError::protocol(&pid, "empty script"));
            }
            Ok(script[req.sample_index as usize % script.len()].clone())
        })
    }

    /// The first rule whose key occurs in the prompt supplies the response.
    pub fn by_prompt_substring(id: impl Into<String>, rules: Vec<(&str, &str)>) -> Self {
        let id = id.into();
        let rules: Vec<(String, String)> =
            rules.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let pid = id.clone();
        Self::from_fn(id, move |req| {
            rules
                .iter()
                .find(|(k, _)| req.prompt.contains(k.as_str()))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| ProviderError::protocol(&pid, "no scripted response for prompt"))
        })
    }

    /// Always fails with a transport error.
    pub fn failing(id: impl Into<String>) -> Self {
        let id = id.into();
        let pid = id.clone();
        Self::from_fn(id, move |_| Err(ProviderError::transport(&pid, "connection refused")))
    }

    /// Wraps the script so prompts containing `needle` fail in transport.
    pub fn failing_on(self, needle: &str) -> Self {
        let inner = self.respond.clone();
        let needle = needle.to_string();
        let pid = self.id.clone();
        Self::from_fn(self.id, move |req| {
            if req.prompt.contains(&needle) {
                Err(ProviderError::transport(&pid, "connection reset"))
            } else {
                inner(req)
            }
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Generator for ScriptedGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(request)
    }
}

type SearchFn = dyn Fn(&SearchRequest) -> Result<Vec<SearchHit>, ProviderError> + Send + Sync;

pub struct ScriptedSearch {
    name: String,
    respond: Arc<SearchFn>,
    calls: AtomicUsize,
}

impl ScriptedSearch {
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&SearchRequest) -> Result<Vec<SearchHit>, ProviderError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            respond: Arc::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Returns the same hits for every query (truncated to `max_results`).
    pub fn fixed(name: impl Into<String>, hits: Vec<SearchHit>) -> Self {
        Self::from_fn(name, move |req| Ok(hits.iter().take(req.max_results).cloned().collect()))
    }

    /// Looks the query up in a table; unknown queries get no hits.
    pub fn table(name: impl Into<String>, table: HashMap<String, Vec<SearchHit>>) -> Self {
        Self::from_fn(name, move |req| {
            Ok(table
                .get(&req.query)
                .map(|h| h.iter().take(req.max_results).cloned().collect())
                .unwrap_or_default())
        })
    }

    pub fn failing(name: impl Into<String>) -> Self {
        let name = name.into();
        let pid = name.clone();
        Self::from_fn(name, move |_| Err(ProviderError::transport(&pid, "service unavailable")))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl SearchProvider for ScriptedSearch {
    fn name(&self) -> &str {
        &self.name
    }

    async fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(request)
    }
}

type EmbedFn = dyn Fn(&str) -> Option<Vec<f64>> + Send + Sync;

pub struct ScriptedEmbedder {
    id: String,
    embed_one: Arc<EmbedFn>,
    calls: AtomicUsize,
}

impl ScriptedEmbedder {
    /// `f` returns `None` for texts it cannot embed, failing the batch.
    pub fn from_fn<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&str) -> Option<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            embed_one: Arc::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn table(id: impl Into<String>, table: HashMap<String, Vec<f64>>) -> Self {
        Self::from_fn(id, move |t| table.get(t).cloned())
    }

    /// Hashed bag-of-words vectors: texts sharing words are similar.
    pub fn bag_of_words(id: impl Into<String>, dimension: usize) -> Self {
        Self::from_fn(id, move |t| {
            let mut v = vec![0.0; dimension];
            for w in t.split_whitespace() {
                let w = w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
                if !w.is_empty() {
                    v[(crate::text::fnv1a64(w.as_bytes()) % dimension as u64) as usize] += 1.0;
                }
            }
            if v.iter().all(|x| *x == 0.0) {
                v[0] = 1e-3;
            }
            Some(v)
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Embedder for ScriptedEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        texts
            .iter()
            .map(|t| {
                (self.embed_one)(t)
                    .ok_or_else(|| ProviderError::protocol(&self.id, format!("no embedding for {t:?}")))
            })
            .collect()
    }
}

type NliFn = dyn Fn(&NliPair) -> NliPrediction + Send + Sync;

pub struct ScriptedNli {
    id: String,
    predict: Arc<NliFn>,
    fail_batches: bool,
    calls: AtomicUsize,
}

impl ScriptedNli {
    pub fn from_fn<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&NliPair) -> NliPrediction + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            predict: Arc::new(f),
            fail_batches: false,
            calls: AtomicUsize::new(0),
        }
    }

    /// Looks the premise up; unknown premises get the label `"unknown"`,
    /// which the stance mapper drops.
    pub fn by_premise(id: impl Into<String>, table: HashMap<String, NliPrediction>) -> Self {
        Self::from_fn(id, move |pair| {
            table.get(&pair.premise).cloned().unwrap_or(NliPrediction {
                label: "unknown".into(),
                score: None,
            })
        })
    }

    pub fn constant(id: impl Into<String>, label: &str, score: f64) -> Self {
        let label = label.to_string();
        Self::from_fn(id, move |_| NliPrediction {
            label: label.clone(),
            score: Some(score),
        })
    }

    pub fn failing(id: impl Into<String>) -> Self {
        let mut nli = Self::constant(id, "supporting", 1.0);
        nli.fail_batches = true;
        nli
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl NliProvider for ScriptedNli {
    fn id(&self) -> &str {
        &self.id
    }

    async fn classify(&self, pairs: &[NliPair]) -> Result<Vec<NliPrediction>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail_batches {
            return Err(ProviderError::transport(&self.id, "model server down"));
        }
        Ok(pairs.iter().map(|p| (self.predict)(p)).collect())
    }
}

/// Convenience constructor for a search hit.
pub fn hit(title: &str, url: &str, snippet: &str) -> SearchHit {
    SearchHit {
        title: title.to_string(),
        url: url.to_string(),
        snippet: snippet.to_string(),
    }
}
