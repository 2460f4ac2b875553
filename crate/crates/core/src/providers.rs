//! Client-side contracts for the external services the pipeline talks to:
//! question generators, web search engines, sentence embedders and NLI
//! models. Concrete HTTP adapters live in the application crate; the
//! [`crate::scripted`] module provides deterministic in-process stand-ins.

use std::future::Future;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::questiongen::SamplingConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("{provider}: transport error: {message}")]
    Transport { provider: String, message: String },
    #[error("{provider}: no response within {after:?}")]
    Timeout { provider: String, after: Duration },
    /// The service answered, but with something the adapter could not use.
    #[error("{provider}: protocol error: {message}")]
    Protocol { provider: String, message: String },
    /// Cache-only mode and the request has never been seen.
    #[error("{provider}: no cached response and live calls are disabled")]
    Offline { provider: String },
}

impl ProviderError {
    pub fn transport(provider: impl Into<String>, message: impl ToString) -> Self {
        Self::Transport {
            provider: provider.into(),
            message: message.to_string(),
        }
    }

    pub fn protocol(provider: impl Into<String>, message: impl ToString) -> Self {
        Self::Protocol {
            provider: provider.into(),
            message: message.to_string(),
        }
    }

    pub fn provider(&self) -> &str {
        match self {
            Self::Transport { provider, .. }
            | Self::Timeout { provider, .. }
            | Self::Protocol { provider, .. }
            | Self::Offline { provider } => provider,
        }
    }

    /// Only transport failures and timeouts are worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::Timeout { .. })
    }
}

/// Timeout and retry budget applied around a single provider call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallPolicy {
    #[serde(with = "millis", rename = "timeout_ms")]
    pub timeout: Duration,
    pub max_retries: u32,
    #[serde(with = "millis", rename = "backoff_ms")]
    pub backoff: Duration,
}

impl Default for CallPolicy {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            max_retries: 2,
            backoff: Duration::from_millis(250),
        }
    }
}

impl CallPolicy {
    pub fn no_retries(timeout: Duration) -> Self {
        Self {
            timeout,
            max_retries: 0,
            backoff: Duration::ZERO,
        }
    }

    /// Runs `call` under the timeout, retrying transient failures with
    /// exponential backoff (`backoff`, `2 * backoff`, ...).
    pub async fn run<T, F, Fut>(&self, provider: &str, mut call: F) -> Result<T, ProviderError>
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, ProviderError>>,
    {
        let mut attempt = 0u32;
        loop {
            let result = match tokio::time::timeout(self.timeout, call()).await {
                Ok(r) => r,
                Err(_) => Err(ProviderError::Timeout {
                    provider: provider.to_string(),
                    after: self.timeout,
                }),
            };
            match result {
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    let delay = self.backoff.saturating_mul(1u32 << attempt.min(16));
                    tracing::warn!(provider, attempt, error = %e, "retrying provider call");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// One generation call. `sampling` is `None` when the serving stack's own
/// defaults should apply; `sample_index` distinguishes repeated samples of
/// the same prompt (it is part of the cache identity, not the wire body).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub sampling: Option<SamplingConfig>,
    pub sample_index: u32,
}

#[async_trait]
pub trait Generator: Send + Sync {
    fn id(&self) -> &str;
    async fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    pub max_results: usize,
}

/// A raw search result as returned by an engine adapter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    fn name(&self) -> &str;
    async fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    /// Returns one vector per input text, in input order.
    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

/// Raw per-pair output of an NLI service, before mapping onto the binary
/// stance contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliPrediction {
    pub label: String,
    #[serde(default)]
    pub score: Option<f64>,
}

#[async_trait]
pub trait NliProvider: Send + Sync {
    fn id(&self) -> &str;
    /// Returns one prediction per pair, in input order.
    async fn classify(&self, pairs: &[NliPair]) -> Result<Vec<NliPrediction>, ProviderError>;
}
