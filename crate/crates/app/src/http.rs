//! HTTP adapters for the provider traits.
//!
//! Wire formats:
//! - generation: `POST {prompt, <sampling fields>}` returning `{text}`
//! - generic search: `POST {query, max_results}` returning `[{title, url, snippet}]`
//! - embedding: `POST {texts}` returning `{embeddings}`
//! - NLI: `POST [{premise, hypothesis}]` returning `[{label, score}]`
//!
//! Named search engines are queried through their public APIs and mapped
//! onto [`SearchHit`].

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use factcheck_core::providers::{
    Embedder, GenerationRequest, Generator, NliPair, NliPrediction, NliProvider, ProviderError, SearchHit,
    SearchProvider, SearchRequest,
};
use reqwest::{Client, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;

use crate::config::{EndpointConfig, Engine, NliConfig, SearchProviderConfig};
use crate::error::AppError;

pub fn client() -> Client {
    Client::builder()
        .user_agent(concat!("factcheck/", env!("CARGO_PKG_VERSION")))
        .build()
        .expect("http client builds")
}

fn api_key(var: Option<&str>) -> Result<Option<String>, AppError> {
    match var {
        None => Ok(None),
        Some(v) => std::env::var(v)
            .map(Some)
            .map_err(|_| AppError::validation(format!("environment variable {v} is not set"))),
    }
}

/// Sends a request and decodes a JSON body. Server errors and rate limits
/// are transient; other non-success statuses are protocol errors.
async fn send_json<T: DeserializeOwned>(provider: &str, req: RequestBuilder) -> Result<T, ProviderError> {
    let resp = req.send().await.map_err(|e| ProviderError::transport(provider, e))?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().await.unwrap_or_default();
        let snippet: String = body.chars().take(200).collect();
        let msg = format!("HTTP {status}: {snippet}");
        return Err(if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            ProviderError::transport(provider, msg)
        } else {
            ProviderError::protocol(provider, msg)
        });
    }
    let bytes = resp.bytes().await.map_err(|e| ProviderError::transport(provider, e))?;
    serde_json::from_slice(&bytes).map_err(|e| ProviderError::protocol(provider, format!("bad response body: {e}")))
}

pub struct HttpGenerator {
    id: String,
    endpoint: String,
    client: Client,
}

impl HttpGenerator {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, client: Client) -> Self {
        Self {
            id: id.into(),
            endpoint: endpoint.into(),
            client,
        }
    }
}

/// Body of a generation request: the prompt plus each sampling field by
/// name. Nothing but the prompt is sent when sampling is left to the server.
pub fn generation_body(request: &GenerationRequest) -> Value {
    let mut body = Map::new();
    body.insert("prompt".into(), Value::String(request.prompt.clone()));
    if let Some(s) = &request.sampling {
        if let Value::Object(fields) = serde_json::to_value(s).expect("sampling serializes") {
            body.extend(fields);
        }
    }
    Value::Object(body)
}

#[derive(Deserialize)]
struct GenerationResponse {
    text: String,
}

#[async_trait]
impl Generator for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let req = self.client.post(&self.endpoint).json(&generation_body(request));
        let resp: GenerationResponse = send_json(&self.id, req).await?;
        Ok(resp.text)
    }
}

pub struct HttpSearch {
    config: SearchProviderConfig,
    endpoint: String,
    key: Option<String>,
    client: Client,
    last_request: Mutex<Option<Instant>>,
}

impl HttpSearch {
    pub fn from_config(config: &SearchProviderConfig, client: Client) -> Result<Self, AppError> {
        let endpoint = config
            .endpoint()
            .ok_or_else(|| AppError::validation(format!("search {} has no endpoint", config.name)))?
            .to_string();
        Ok(Self {
            key: api_key(config.api_key_env.as_deref())?,
            config: config.clone(),
            endpoint,
            client,
            last_request: Mutex::new(None),
        })
    }

    async fn pace(&self) {
        let Some(ms) = self.config.min_interval_ms else { return };
        let gap = Duration::from_millis(ms);
        let mut last = self.last_request.lock().await;
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < gap {
                tokio::time::sleep(gap - elapsed).await;
            }
        }
        *last = Some(Instant::now());
    }

    fn request(&self, req: &SearchRequest) -> RequestBuilder {
        let n = req.max_results.to_string();
        let key = self.key.as_deref().unwrap_or_default();
        let c = &self.client;
        match self.config.engine {
            Engine::Generic => {
                let r = c.post(&self.endpoint).json(&json!({ "query": req.query, "max_results": req.max_results }));
                match &self.key {
                    Some(k) => r.bearer_auth(k),
                    None => r,
                }
            }
            Engine::Google => {
                // the API caps num at 10
                let num = req.max_results.clamp(1, 10).to_string();
                let cx = self.config.cx.as_deref().unwrap_or_default();
                c.get(&self.endpoint).query(&[("key", key), ("cx", cx), ("q", &req.query), ("num", &num)])
            }
            Engine::Bing => c
                .get(&self.endpoint)
                .header("Ocp-Apim-Subscription-Key", key)
                .query(&[("q", req.query.as_str()), ("count", &n)]),
            Engine::You => c
                .get(&self.endpoint)
                .header("X-API-Key", key)
                .query(&[("query", req.query.as_str()), ("num_web_results", &n)]),
            Engine::Wikipedia => c.get(&self.endpoint).query(&[
                ("action", "query"),
                ("list", "search"),
                ("format", "json"),
                ("srsearch", &req.query),
                ("srlimit", &n),
            ]),
            Engine::SemanticScholar => {
                let r = c
                    .get(&self.endpoint)
                    .query(&[("query", req.query.as_str()), ("limit", &n), ("fields", "title,url,abstract,tldr")]);
                match &self.key {
                    Some(k) => r.header("x-api-key", k),
                    None => r,
                }
            }
        }
    }
}

#[async_trait]
impl SearchProvider for HttpSearch {
    fn name(&self) -> &str {
        &self.config.name
    }

    async fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        self.pace().await;
        let body: Value = send_json(&self.config.name, self.request(request)).await?;
        let mut hits = parse_engine_response(self.config.engine, &self.endpoint, &body)
            .map_err(|e| ProviderError::protocol(&self.config.name, e))?;
        hits.truncate(request.max_results);
        Ok(hits)
    }
}

fn str_at<'a>(v: &'a Value, path: &[&str]) -> Option<&'a str> {
    path.iter().try_fold(v, |acc, k| acc.get(k))?.as_str()
}

fn array_at<'a>(v: &'a Value, path: &[&str]) -> Result<&'a Vec<Value>, String> {
    match path.iter().try_fold(v, |acc, k| acc.get(k)) {
        Some(Value::Array(a)) => Ok(a),
        // engines omit the list entirely when nothing matched
        None => {
            static EMPTY: Vec<Value> = Vec::new();
            Ok(&EMPTY)
        }
        Some(_) => Err(format!("field {} is not a list", path.join("."))),
    }
}

/// Removes markup from engine snippets (Wikipedia highlights matches with
/// `<span>` tags) and decodes the common entities.
pub fn strip_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn hit_from(title: Option<&str>, url: Option<&str>, snippet: Option<&str>) -> Option<SearchHit> {
    let url = url?.trim();
    let snippet = snippet?.trim();
    if url.is_empty() || snippet.is_empty() {
        return None;
    }
    Some(SearchHit {
        title: title.unwrap_or_default().trim().to_string(),
        url: url.to_string(),
        snippet: snippet.to_string(),
    })
}

/// Maps one engine's response body onto search hits. Results without a URL
/// or text are skipped.
pub fn parse_engine_response(engine: Engine, endpoint: &str, body: &Value) -> Result<Vec<SearchHit>, String> {
    let hits = match engine {
        Engine::Generic => {
            let hits: Vec<SearchHit> = serde_json::from_value(body.clone()).map_err(|e| e.to_string())?;
            hits.into_iter().filter_map(|h| hit_from(Some(&h.title), Some(&h.url), Some(&h.snippet))).collect()
        }
        Engine::Google => array_at(body, &["items"])?
            .iter()
            .filter_map(|i| hit_from(str_at(i, &["title"]), str_at(i, &["link"]), str_at(i, &["snippet"])))
            .collect(),
        Engine::Bing => array_at(body, &["webPages", "value"])?
            .iter()
            .filter_map(|i| hit_from(str_at(i, &["name"]), str_at(i, &["url"]), str_at(i, &["snippet"])))
            .collect(),
        Engine::You => array_at(body, &["hits"])?
            .iter()
            .filter_map(|i| {
                let joined = i.get("snippets").and_then(Value::as_array).map(|s| {
                    s.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(" ")
                });
                let text = joined.filter(|s| !s.trim().is_empty());
                let text = text.as_deref().or(str_at(i, &["description"]));
                hit_from(str_at(i, &["title"]), str_at(i, &["url"]), text)
            })
            .collect(),
        Engine::Wikipedia => {
            let base = reqwest::Url::parse(endpoint).map_err(|e| e.to_string())?;
            array_at(body, &["query", "search"])?
                .iter()
                .filter_map(|i| {
                    let title = str_at(i, &["title"])?;
                    let mut page = base.clone();
                    page.set_query(None);
                    page.set_path(&format!("/wiki/{}", title.replace(' ', "_")));
                    let text = strip_html(str_at(i, &["snippet"])?);
                    hit_from(Some(title), Some(page.as_str()), Some(&text))
                })
                .collect()
        }
        Engine::SemanticScholar => array_at(body, &["data"])?
            .iter()
            .filter_map(|i| {
                let text = str_at(i, &["abstract"]).or(str_at(i, &["tldr", "text"]));
                hit_from(str_at(i, &["title"]), str_at(i, &["url"]), text)
            })
            .collect(),
    };
    Ok(hits)
}

pub struct HttpEmbedder {
    id: String,
    endpoint: String,
    key: Option<String>,
    client: Client,
}

impl HttpEmbedder {
    pub fn from_config(config: &EndpointConfig, client: Client) -> Result<Self, AppError> {
        Ok(Self {
            id: config.id.clone(),
            endpoint: config.endpoint.clone(),
            key: api_key(config.api_key_env.as_deref())?,
            client,
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embeddings: Vec<Vec<f64>>,
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let mut req = self.client.post(&self.endpoint).json(&json!({ "texts": texts }));
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp: EmbeddingResponse = send_json(&self.id, req).await?;
        if resp.embeddings.len() != texts.len() {
            return Err(ProviderError::protocol(
                &self.id,
                format!("{} embeddings for {} texts", resp.embeddings.len(), texts.len()),
            ));
        }
        Ok(resp.embeddings)
    }
}

pub struct HttpNli {
    id: String,
    endpoint: String,
    key: Option<String>,
    label_map: BTreeMap<String, String>,
    client: Client,
}

impl HttpNli {
    pub fn from_config(config: &NliConfig, client: Client) -> Result<Self, AppError> {
        Ok(Self {
            id: config.id.clone(),
            endpoint: config.endpoint.clone(),
            key: api_key(config.api_key_env.as_deref())?,
            label_map: config.label_map.clone(),
            client,
        })
    }
}

#[async_trait]
impl NliProvider for HttpNli {
    fn id(&self) -> &str {
        &self.id
    }

    async fn classify(&self, pairs: &[NliPair]) -> Result<Vec<NliPrediction>, ProviderError> {
        let mut req = self.client.post(&self.endpoint).json(pairs);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let mut preds: Vec<NliPrediction> = send_json(&self.id, req).await?;
        if preds.len() != pairs.len() {
            return Err(ProviderError::protocol(
                &self.id,
                format!("{} predictions for {} pairs", preds.len(), pairs.len()),
            ));
        }
        for p in &mut preds {
            if let Some(mapped) = self.label_map.get(&p.label) {
                p.label = mapped.clone();
            }
        }
        Ok(preds)
    }
}
