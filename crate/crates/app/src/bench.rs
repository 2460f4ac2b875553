//! Benchmark runners: question-generation overlap scores per (backend,
//! dataset) and veracity classification per question-generation method.
//! Every number in the text and TSV reports comes from the same
//! [`QgBenchmark`] or [`VerdictBenchmark`] value.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use factcheck_core::datasets::{Claim, DatasetRecord, Split};
use factcheck_core::metrics::{
    attach_significance, best_match_report, classification_report, corpus_report, ClaimQuestions,
    ClassificationReport, CorpusReport, Metric, ScoredPairInput,
};
use factcheck_core::providers::{GenerationRequest, ProviderError};
use factcheck_core::questiongen::{build_prompt, parse_generation, Backend, PromptTemplate};
use factcheck_core::text::normalize_whitespace;
use factcheck_core::verification::{verify_claim, Method, Pipeline, Stage, Veracity};
use futures::{stream, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::CacheStats;
use crate::config::PipelineConfig;
use crate::error::AppError;
use crate::report::{aligned, fmt4, tsv};

pub const SIGNIFICANCE_MARK: &str = "†";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Reference `i` of a claim is scored against the question parsed from
    /// sample `i` for that claim.
    #[default]
    Faithful,
    /// Extension: each reference is scored against its best-scoring
    /// generated question for the claim.
    BestMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QgOptions {
    pub alignment: Alignment,
    /// Backend every other backend is tested against.
    pub baseline: Option<String>,
    pub alpha: f64,
    pub parallelism: usize,
}

impl Default for QgOptions {
    fn default() -> Self {
        Self {
            alignment: Alignment::Faithful,
            baseline: None,
            alpha: 0.05,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub records: Vec<DatasetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgCell {
    pub backend: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CorpusReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgItem {
    pub backend: String,
    pub dataset: String,
    pub claim_id: String,
    pub pair_id: String,
    pub reference: String,
    /// Question scored against the reference (faithful mode) or every
    /// generated question for the claim (best-match mode).
    pub generated: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgBenchmark {
    pub alignment: Alignment,
    pub baseline: Option<String>,
    pub alpha: f64,
    pub datasets: Vec<String>,
    pub backends: Vec<String>,
    pub cells: Vec<QgCell>,
    pub items: Vec<QgItem>,
}

/// Per-claim generations: one parsed sample per reference question.
struct ClaimGeneration {
    samples: Vec<Option<Vec<String>>>,
}

async fn generate_for_claim(
    backend: &Backend,
    template: &PromptTemplate,
    claim: &Claim,
    samples: usize,
) -> Result<ClaimGeneration, ProviderError> {
    let kind = backend.descriptor.kind;
    let prompt = build_prompt(claim, template, kind);
    let sampling = backend.descriptor.effective_sampling();
    let policy = backend.descriptor.call_policy();
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let request = GenerationRequest {
            prompt: prompt.clone(),
            sampling,
            sample_index: i as u32,
        };
        let raw = policy.run(backend.id(), || backend.client.generate(&request)).await?;
        out.push(parse_generation(&raw, kind));
    }
    Ok(ClaimGeneration { samples: out })
}

fn pooled(samples: &[Option<Vec<String>>]) -> Option<Vec<String>> {
    let mut seen = BTreeSet::new();
    let all: Vec<String> = samples
        .iter()
        .flatten()
        .flatten()
        .filter(|q| seen.insert(normalize_whitespace(q).to_lowercase()))
        .cloned()
        .collect();
    (!all.is_empty()).then_some(all)
}

async fn run_cell(
    backend: &Backend,
    template: &PromptTemplate,
    dataset: &NamedDataset,
    options: &QgOptions,
) -> Result<(CorpusReport, Vec<QgItem>), String> {
    let records: Vec<&DatasetRecord> = dataset
        .records
        .iter()
        .filter(|r| r.split == Split::Test && !r.reference_questions.is_empty())
        .collect();
    if records.is_empty() {
        return Err(format!("dataset {} has no test records", dataset.name));
    }
    let generations: Vec<ClaimGeneration> = stream::iter(records.iter().map(|r| {
        generate_for_claim(backend, template, &r.claim, r.reference_questions.len())
    }))
    .buffered(options.parallelism.max(1))
    .try_collect()
    .await
    .map_err(|e| e.to_string())?;

    let mut items = Vec::new();
    let report = match options.alignment {
        Alignment::Faithful => {
            let mut pairs = Vec::new();
            for (r, g) in records.iter().zip(&generations) {
                for (i, q) in r.reference_questions.iter().enumerate() {
                    let pair_id = format!("{}#{i}", r.claim.id);
                    let first = g.samples[i].as_ref().and_then(|qs| qs.first()).cloned();
                    items.push(QgItem {
                        backend: backend.id().to_string(),
                        dataset: dataset.name.clone(),
                        claim_id: r.claim.id.clone(),
                        pair_id: pair_id.clone(),
                        reference: q.clone(),
                        generated: first.clone().map(|f| vec![f]),
                    });
                    pairs.push(ScoredPairInput {
                        pair_id,
                        reference: q.clone(),
                        generation: first,
                    });
                }
            }
            corpus_report(&pairs, &Metric::ALL)
        }
        Alignment::BestMatch => {
            let mut claims = Vec::new();
            for (r, g) in records.iter().zip(&generations) {
                let pool = pooled(&g.samples);
                let references: Vec<(String, String)> = r
                    .reference_questions
                    .iter()
                    .enumerate()
                    .map(|(i, q)| (format!("{}#{i}", r.claim.id), q.clone()))
                    .collect();
                for (pair_id, q) in &references {
                    items.push(QgItem {
                        backend: backend.id().to_string(),
                        dataset: dataset.name.clone(),
                        claim_id: r.claim.id.clone(),
                        pair_id: pair_id.clone(),
                        reference: q.clone(),
                        generated: pool.clone(),
                    });
                }
                claims.push(ClaimQuestions {
                    claim_id: r.claim.id.clone(),
                    references,
                    generated: pool,
                });
            }
            best_match_report(&claims, &Metric::ALL)
        }
    }
    .map_err(|e| e.to_string())?;
    Ok((report, items))
}

/// Scores every backend on the test split of every dataset. A backend
/// failing on a dataset yields an error cell; the run continues.
pub async fn run_qg_benchmark(
    datasets: &[NamedDataset],
    backends: &[Backend],
    template: &PromptTemplate,
    options: &QgOptions,
) -> Result<QgBenchmark, AppError> {
    if datasets.is_empty() || backends.is_empty() {
        return Err(AppError::validation("need at least one dataset and one backend"));
    }
    if let Some(b) = &options.baseline {
        if !backends.iter().any(|x| x.id() == b) {
            return Err(AppError::validation(format!("baseline {b:?} is not among the benchmarked backends")));
        }
    }
    let mut cells = Vec::new();
    let mut items = Vec::new();
    for backend in backends {
        for ds in datasets {
            let (report, error) = match run_cell(backend, template, ds, options).await {
                Ok((report, its)) => {
                    items.extend(its);
                    (Some(report), None)
                }
                Err(e) => {
                    tracing::warn!(backend = backend.id(), dataset = %ds.name, error = %e, "benchmark cell failed");
                    (None, Some(e))
                }
            };
            cells.push(QgCell {
                backend: backend.id().to_string(),
                dataset: ds.name.clone(),
                report,
                error,
            });
        }
    }
    if let Some(base) = &options.baseline {
        let baselines: BTreeMap<String, CorpusReport> = cells
            .iter()
            .filter(|c| &c.backend == base)
            .filter_map(|c| c.report.clone().map(|r| (c.dataset.clone(), r)))
            .collect();
        for cell in cells.iter_mut().filter(|c| &c.backend != base) {
            if let (Some(report), Some(b)) = (cell.report.as_mut(), baselines.get(&cell.dataset)) {
                attach_significance(report, base, b, options.alpha)?;
            }
        }
    }
    Ok(QgBenchmark {
        alignment: options.alignment,
        baseline: options.baseline.clone(),
        alpha: options.alpha,
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        backends: backends.iter().map(|b| b.id().to_string()).collect(),
        cells,
        items,
    })
}

impl QgBenchmark {
    fn cell(&self, backend: &str, dataset: &str) -> Option<&QgCell> {
        self.cells.iter().find(|c| c.backend == backend && c.dataset == dataset)
    }

    fn value(&self, backend: &str, dataset: &str, metric: Metric) -> String {
        match self.cell(backend, dataset) {
            Some(QgCell { report: Some(r), .. }) => {
                let mut s = fmt4(r.mean(metric).unwrap_or(0.0));
                if r.significance.get(&metric).is_some_and(|x| x.significant) {
                    s.push_str(SIGNIFICANCE_MARK);
                }
                s
            }
            _ => "error".into(),
        }
    }

    fn wide_rows(&self) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
        let mut top = vec!["Model".to_string()];
        let mut sub = vec![String::new()];
        for d in &self.datasets {
            for (i, m) in Metric::ALL.iter().enumerate() {
                top.push(if i == 0 { d.clone() } else { String::new() });
                sub.push(m.label().to_string());
            }
        }
        let body = self
            .backends
            .iter()
            .map(|b| {
                let mut row = vec![b.clone()];
                for d in &self.datasets {
                    for m in Metric::ALL {
                        row.push(self.value(b, d, m));
                    }
                }
                row
            })
            .collect();
        (vec![top, sub], body)
    }

    /// Wide layout: one row per backend, (R-1, R-L, BLEU) per dataset.
    pub fn to_tsv(&self) -> String {
        let mut header = vec!["model".to_string()];
        for d in &self.datasets {
            for m in Metric::ALL {
                header.push(format!("{d} {}", m.label()));
            }
        }
        let (_, body) = self.wide_rows();
        tsv(&std::iter::once(header).chain(body).collect::<Vec<_>>())
    }

    /// Long layout with counts and test statistics, one row per (backend,
    /// dataset, metric).
    pub fn to_cells_tsv(&self) -> String {
        let mut rows = vec![["backend", "dataset", "metric", "mean", "n_pairs", "n_null", "t", "p", "significant", "error"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for c in &self.cells {
            for m in Metric::ALL {
                let mut row = vec![c.backend.clone(), c.dataset.clone(), m.label().to_string()];
                match &c.report {
                    Some(r) => {
                        row.push(fmt4(r.mean(m).unwrap_or(0.0)));
                        row.push(r.n_pairs.to_string());
                        row.push(r.n_null.to_string());
                        match r.significance.get(&m) {
                            Some(s) => {
                                row.push(fmt4(s.t));
                                row.push(fmt4(s.p));
                                row.push(s.significant.to_string());
                            }
                            None => row.extend(["", "", ""].map(String::from)),
                        }
                        row.push(String::new());
                    }
                    None => {
                        row.extend(["", "", "", "", "", ""].map(String::from));
                        row.push(c.error.clone().unwrap_or_default().replace(['\t', '\n'], " "));
                    }
                }
                rows.push(row);
            }
        }
        tsv(&rows)
    }

    pub fn to_text(&self) -> String {
        let (headers, body) = self.wide_rows();
        let mut out = aligned(&headers, &body);
        if let Some(b) = &self.baseline {
            out.push_str(&format!(
                "{SIGNIFICANCE_MARK} p <= {} against {b} (paired t-test)\n",
                self.alpha
            ));
        }
        let nulls: Vec<String> = self
            .cells
            .iter()
            .filter_map(|c| c.report.as_ref().filter(|r| r.n_null > 0).map(|r| (c, r)))
            .map(|(c, r)| format!("{}/{}: {} of {} null", c.backend, c.dataset, r.n_null, r.n_pairs))
            .collect();
        if !nulls.is_empty() {
            out.push_str(&format!("null generations (scored 0): {}\n", nulls.join("; ")));
        }
        for c in self.cells.iter().filter(|c| c.error.is_some()) {
            out.push_str(&format!("error {}/{}: {}\n", c.backend, c.dataset, c.error.as_deref().unwrap_or("")));
        }
        out
    }
}

/// A question-generation method for the verdict benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodSpec {
    ClaimOnly,
    /// The reference questions shipped with the claims file.
    Human,
    Backend(String),
}

impl MethodSpec {
    pub fn parse(s: &str) -> Self {
        match s {
            "claim_only" | "claim-only" => Self::ClaimOnly,
            "human" | "human_written" => Self::Human,
            other => Self::Backend(other.strip_prefix("backend:").unwrap_or(other).to_string()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::ClaimOnly => "claim_only".into(),
            Self::Human => "human_written".into(),
            Self::Backend(id) => id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ClassificationReport>,
    pub scored: usize,
    pub abstained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstention {
    pub method: String,
    pub claim_id: String,
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictItem {
    pub method: String,
    pub claim_id: String,
    pub gold: Veracity,
    pub predicted: Veracity,
    pub supporting_votes: usize,
    pub refuting_votes: usize,
    pub tie_broken: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictBenchmark {
    pub rows: Vec<VerdictRow>,
    pub items: Vec<VerdictItem>,
    pub abstentions: Vec<Abstention>,
    /// Claims without a True/False gold label, left out of every method.
    pub unlabeled: Vec<String>,
}

/// Verifies every labeled claim with every method. Pipeline failures are
/// abstentions: listed, counted and excluded from the scores.
pub async fn run_verdict_benchmark(
    records: &[DatasetRecord],
    methods: &[MethodSpec],
    pipeline: &Pipeline,
    parallelism: usize,
) -> Result<VerdictBenchmark, AppError> {
    if methods.is_empty() {
        return Err(AppError::validation("no methods to evaluate"));
    }
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for r in records {
        match r.claim.gold_label.as_ref().and_then(|g| g.as_bool()) {
            Some(b) => labeled.push((r, Veracity::from_bool(b))),
            None => unlabeled.push(r.claim.id.clone()),
        }
    }
    if labeled.is_empty() {
        return Err(AppError::validation("no claims with a true/false gold label"));
    }
    let human = Arc::new(
        records
            .iter()
            .map(|r| (r.claim.id.clone(), r.reference_questions.clone()))
            .collect::<BTreeMap<_, _>>(),
    );
    let mut rows = Vec::new();
    let mut items = Vec::new();
    let mut abstentions = Vec::new();
    for spec in methods {
        let method = match spec {
            MethodSpec::ClaimOnly => Method::ClaimOnly,
            MethodSpec::Human => Method::HumanQuestions {
                name: spec.name(),
                questions: human.clone(),
            },
            MethodSpec::Backend(id) => {
                if pipeline.backend(id).is_none() {
                    return Err(AppError::validation(format!("unknown backend {id:?}")));
                }
                Method::Backend(id.clone())
            }
        };
        let name = spec.name();
        let results: Vec<_> = stream::iter(labeled.iter().map(|(r, _)| verify_claim(&r.claim, &method, pipeline)))
            .buffered(parallelism.max(1))
            .collect()
            .await;
        let mut predicted = Vec::new();
        let mut gold = Vec::new();
        let mut abstained = 0;
        for ((r, g), result) in labeled.iter().zip(results) {
            match result {
                Ok(rec) => {
                    predicted.push(rec.verdict.label);
                    gold.push(*g);
                    items.push(VerdictItem {
                        method: name.clone(),
                        claim_id: r.claim.id.clone(),
                        gold: *g,
                        predicted: rec.verdict.label,
                        supporting_votes: rec.verdict.supporting_votes,
                        refuting_votes: rec.verdict.refuting_votes,
                        tie_broken: rec.verdict.tie_broken,
                        fallback: rec.fallback,
                    });
                }
                Err(e) => {
                    abstained += 1;
                    abstentions.push(Abstention {
                        method: name.clone(),
                        claim_id: r.claim.id.clone(),
                        stage: e.stage,
                        message: e.message,
                    });
                }
            }
        }
        let report = if gold.is_empty() {
            None
        } else {
            Some(classification_report(&predicted, &gold)?)
        };
        rows.push(VerdictRow {
            method: name,
            report,
            scored: gold.len(),
            abstained,
        });
    }
    Ok(VerdictBenchmark {
        rows,
        items,
        abstentions,
        unlabeled,
    })
}

impl VerdictBenchmark {
    fn table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["Method", "Macro F1", "Micro F1", "True F1", "False F1", "Scored", "Abstained"]
            .map(String::from)
            .to_vec();
        let body = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.method.clone()];
                match &r.report {
                    Some(c) => row.extend([
                        fmt4(c.macro_f1),
                        fmt4(c.micro_f1),
                        fmt4(c.class_f1(Veracity::True)),
                        fmt4(c.class_f1(Veracity::False)),
                    ]),
                    None => row.extend(["n/a"; 4].map(String::from)),
                }
                row.push(r.scored.to_string());
                row.push(r.abstained.to_string());
                row
            })
            .collect();
        (header, body)
    }

    pub fn to_tsv(&self) -> String {
        let (h, body) = self.table();
        tsv(&std::iter::once(h).chain(body).collect::<Vec<_>>())
    }

    pub fn to_text(&self) -> String {
        let (h, body) = self.table();
        let mut out = aligned(&[h], &body);
        if !self.unlabeled.is_empty() {
            out.push_str(&format!("{} claims without a true/false label were skipped\n", self.unlabeled.len()));
        }
        for a in &self.abstentions {
            out.push_str(&format!("abstained {}/{} at {}: {}\n", a.method, a.claim_id, a.stage, a.message));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(name: &str, path: &Path) -> Result<Self, AppError> {
        let bytes = std::fs::read(path).map_err(|e| AppError::validation(format!("{}: {e}", path.display())))?;
        Ok(Self {
            name: name.to_string(),
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Metadata persisted next to the reports. Together with the config
/// snapshot and a warm cache it reproduces the reports exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub run_id: String,
    pub kind: String,
    pub config: PipelineConfig,
    pub inputs: Vec<InputFile>,
    /// Command-line selections (backends, methods, alignment, ...).
    pub selection: BTreeMap<String, String>,
    pub started_at: u64,
    pub elapsed_ms: u128,
    pub cache: CacheStats,
    pub files: Vec<String>,
}

fn run_id(kind: &str, config: &PipelineConfig, inputs: &[InputFile], selection: &BTreeMap<String, String>) -> String {
    // the cache mode changes how responses are obtained, not what they are
    let mut config = config.clone();
    config.cache.mode = Default::default();
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(config.to_toml().as_bytes());
    for i in inputs {
        h.update(i.name.as_bytes());
        h.update(i.sha256.as_bytes());
    }
    h.update(serde_json::to_vec(selection).expect("selection serializes"));
    hex::encode(h.finalize())[..16].to_string()
}

/// Clock started when a run begins.
pub struct RunClock {
    started_at: u64,
    start: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self {
            started_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            start: Instant::now(),
        }
    }
}

pub struct RunOutput<'a> {
    pub kind: &'a str,
    pub config: &'a PipelineConfig,
    pub inputs: Vec<InputFile>,
    pub selection: BTreeMap<String, String>,
    pub cache: CacheStats,
    /// (file name, contents); written verbatim.
    pub files: Vec<(&'static str, String)>,
}

/// Writes report files, `config.snapshot.toml` and `run.json` into `dir`.
/// Only `run.json` carries timing data.
pub fn persist_run(dir: &Path, clock: RunClock, out: RunOutput<'_>) -> Result<BenchmarkRun, AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::internal(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, body: &str| {
        std::fs::write(dir.join(name), body).map_err(|e| AppError::internal(format!("{name}: {e}")))
    };
    let mut names = Vec::new();
    for (name, body) in &out.files {
        write(name, body)?;
        names.push(name.to_string());
    }
    write("config.snapshot.toml", &out.config.to_toml())?;
    names.push("config.snapshot.toml".into());
    let run = BenchmarkRun {
        run_id: run_id(out.kind, out.config, &out.inputs, &out.selection),
        kind: out.kind.to_string(),
        config: out.config.clone(),
        inputs: out.inputs,
        selection: out.selection,
        started_at: clock.started_at,
        elapsed_ms: clock.start.elapsed().as_millis(),
        cache: out.cache,
        files: names,
    };
    write("run.json", &(serde_json::to_string_pretty(&run).expect("run serializes") + "\n"))?;
    Ok(run)
}

pub fn results_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("results serialize") + "\n"
}
