#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Local stand-in for every provider protocol. All responses are pure
/// functions of the request.
pub struct MockProviders {
    pub addr: SocketAddr,
    pub requests: Arc<AtomicUsize>,
}

impl MockProviders {
    pub fn count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}/{path}", self.addr)
    }
}

fn fold(s: &str) -> u64 {
    s.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64))
}

async fn generate_seq2seq(State(n): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Json<Value> {
    n.fetch_add(1, Ordering::SeqCst);
    let prompt = body["prompt"].as_str().unwrap_or_default();
    let words: Vec<&str> = prompt.trim_end_matches('.').split_whitespace().collect();
    let text = if prompt.contains("factory") {
        "   ".to_string()
    } else {
        format!("When did {}?", words[words.len().saturating_sub(3)..].join(" ").to_lowercase())
    };
    Json(json!({ "text": text }))
}

async fn generate_llm(State(n): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Json<Value> {
    n.fetch_add(1, Ordering::SeqCst);
    let prompt = body["prompt"].as_str().unwrap_or_default();
    let text = if prompt.contains("budget") {
        "I would ask about the budget.".to_string()
    } else {
        json!({"questions": ["When did it happen?", "Who reported it first?"]}).to_string()
    };
    Json(json!({ "text": format!("Let me think.\n{text}") }))
}

async fn search(State(n): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Json<Value> {
    n.fetch_add(1, Ordering::SeqCst);
    let q = body["query"].as_str().unwrap_or_default();
    let max = body["max_results"].as_u64().unwrap_or(10) as usize;
    let slug: String = q
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let mut hits = vec![json!({
        "title": "Fact check",
        "url": format!("https://www.politifact.com/{slug}"),
        "snippet": format!("Rating for: {q}"),
    })];
    for i in 0..6 {
        hits.push(json!({
            "title": format!("Result {i}"),
            "url": format!("https://site{i}.example/{slug}"),
            "snippet": format!("{q} report number {i} from site {i}"),
        }));
    }
    hits.truncate(max);
    Json(Value::Array(hits))
}

async fn embed(State(n): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Json<Value> {
    n.fetch_add(1, Ordering::SeqCst);
    let texts = body["texts"].as_array().cloned().unwrap_or_default();
    let vectors: Vec<Vec<f64>> = texts
        .iter()
        .map(|t| {
            let mut v = vec![1e-3; 16];
            for w in t.as_str().unwrap_or_default().split_whitespace() {
                v[(fold(&w.to_lowercase()) % 16) as usize] += 1.0;
            }
            v
        })
        .collect();
    Json(json!({ "embeddings": vectors }))
}

async fn nli(State(n): State<Arc<AtomicUsize>>, Json(body): Json<Value>) -> Json<Value> {
    n.fetch_add(1, Ordering::SeqCst);
    let pairs = body.as_array().cloned().unwrap_or_default();
    let preds: Vec<Value> = pairs
        .iter()
        .map(|p| {
            let premise = p["premise"].as_str().unwrap_or_default();
            let hypothesis = p["hypothesis"].as_str().unwrap_or_default();
            let leaning = hypothesis.contains("river") || hypothesis.contains("festival") || hypothesis.contains("tariffs");
            let flip = fold(premise) % 4 == 0;
            let label = if leaning != flip { "ENTAILMENT" } else { "CONTRADICTION" };
            json!({ "label": label, "score": 0.5 + (fold(premise) % 50) as f64 / 100.0 })
        })
        .collect();
    Json(Value::Array(preds))
}

pub async fn spawn_mock() -> MockProviders {
    let requests = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route("/generate/seq2seq", post(generate_seq2seq))
        .route("/generate/llm", post(generate_llm))
        .route("/search", post(search))
        .route("/embed", post(embed))
        .route("/nli", post(nli))
        .with_state(requests.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    MockProviders { addr, requests }
}

/// Writes a config pointing every provider at the mock, with the cache in
/// `dir/cache`.
pub fn write_config(dir: &Path, mock: &MockProviders) -> PathBuf {
    let text = format!(
        r#"top_k = 5
questions_per_claim = 2
max_results = 5
parallelism = 3

[[backends]]
id = "t5"
kind = "fine_tuned_seq2seq"
endpoint = "{seq}"
max_retries = 0

[[backends]]
id = "llm"
kind = "instruction_llm"
endpoint = "{llm}"
max_retries = 0

[[search]]
name = "web"
engine = "generic"
endpoint = "{search}"

[embedder]
id = "hash-embed"
endpoint = "{embed}"

[nli]
id = "mock-nli"
endpoint = "{nli}"
label_map = {{ ENTAILMENT = "entailment", CONTRADICTION = "contradiction" }}

[timeouts]
max_retries = 0

[cache]
dir = "cache"
"#,
        seq = mock.url("generate/seq2seq"),
        llm = mock.url("generate/llm"),
        search = mock.url("search"),
        embed = mock.url("embed"),
        nli = mock.url("nli"),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI binary on a blocking thread so an in-process mock keeps
/// serving.
pub async fn cli(args: Vec<String>) -> CliOutput {
    tokio::task::spawn_blocking(move || {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_factcheck"))
            .args(&args)
            .output()
            .expect("binary runs");
        CliOutput {
            code: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
    })
    .await
    .unwrap()
}

pub fn args(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub mod scripted {
    use std::collections::{BTreeMap, HashMap};
    use std::sync::Arc;
    use std::time::Duration;

    use async_trait::async_trait;
    use factcheck_core::evidence::{Blocklist, RankOptions, SearchOptions};
    use factcheck_core::providers::{CallPolicy, NliPrediction, ProviderError, SearchHit, SearchProvider, SearchRequest};
    use factcheck_core::questiongen::{Backend, BackendDescriptor, BackendKind, PromptTemplate};
    use factcheck_core::scripted::{hit, ScriptedEmbedder, ScriptedGenerator, ScriptedNli, ScriptedSearch};
    use factcheck_core::verification::{Pipeline, PipelineSettings, StanceOptions};

    pub const CLAIM: &str = "The harbour bridge cost twice its budget.";
    pub const QUESTIONS: [&str; 2] = ["What was the bridge budget?", "What did the bridge finally cost?"];
    pub const SNIPPETS: usize = 25;

    /// Snippet `i` has similarity decreasing in `i`; `i % 5` in {0, 1}
    /// refutes. The top 20 hold 12 supporting and 8 refuting votes, while
    /// all 25 would hold 12 and 13.
    pub fn snippet_text(i: usize) -> String {
        format!("bridge evidence item {i:02}")
    }

    pub fn refutes(i: usize) -> bool {
        i % 5 < 2
    }

    /// Delays each response by a query-dependent amount so completion order
    /// varies between runs and parallelism settings.
    struct Jitter {
        inner: ScriptedSearch,
        salt: u64,
    }

    #[async_trait]
    impl SearchProvider for Jitter {
        fn name(&self) -> &str {
            self.inner.name()
        }

        async fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
            let h = request.query.bytes().fold(self.salt, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
            tokio::time::sleep(Duration::from_millis(h % 7)).await;
            self.inner.search(request).await
        }
    }

    fn quick() -> CallPolicy {
        CallPolicy::no_retries(Duration::from_secs(5))
    }

    pub fn pipeline(parallelism: usize, salt: u64) -> Pipeline {
        let queries = [CLAIM, QUESTIONS[0], QUESTIONS[1]];
        let mut table: HashMap<String, Vec<SearchHit>> = HashMap::new();
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        let mut nli: HashMap<String, NliPrediction> = HashMap::new();
        vectors.insert(CLAIM.to_string(), vec![1.0, 0.0]);
        for i in 0..SNIPPETS {
            let text = snippet_text(i);
            table
                .entry(queries[i % 3].to_string())
                .or_default()
                .push(hit(&format!("t{i}"), &format!("https://news{i}.example/a"), &text));
            vectors.insert(text.clone(), vec![1.0, 0.1 * i as f64]);
            nli.insert(
                text,
                NliPrediction {
                    label: if refutes(i) { "contradiction" } else { "entailment" }.into(),
                    score: Some(0.9),
                },
            );
        }
        let generator = ScriptedGenerator::sequence("gen", vec![r#"{"questions": ["What was the bridge budget?", "What did the bridge finally cost?"]}"#]);
        let mut d = BackendDescriptor::new("gen", BackendKind::InstructionLlm, "scripted://gen");
        d.max_retries = 0;
        let mut backends = BTreeMap::new();
        backends.insert("gen".to_string(), Backend::new(d, Arc::new(generator)));
        Pipeline {
            backends,
            search: vec![Arc::new(Jitter {
                inner: ScriptedSearch::table("web", table),
                salt,
            })],
            embedder: Arc::new(ScriptedEmbedder::table("table-embed", vectors)),
            nli: Arc::new(ScriptedNli::by_premise("table-nli", nli)),
            template: PromptTemplate::default(),
            settings: PipelineSettings {
                blocklist: Blocklist::fact_checkers(),
                top_k: 20,
                questions_per_claim: 2,
                search: SearchOptions {
                    max_results: 10,
                    parallelism,
                    policy: quick(),
                },
                rank: RankOptions {
                    policy: quick(),
                    batch_size: 7,
                    ..Default::default()
                },
                stance: StanceOptions {
                    batch_size: 6,
                    policy: quick(),
                },
                ..Default::default()
            },
            audit_dir: None,
        }
    }
}
