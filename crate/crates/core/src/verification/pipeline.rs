//! Per-claim verification: generate questions, search, rank, classify,
//! vote. Every run produces a [`VerificationRecord`] holding all
//! intermediate artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    aggregate_verdict, classify_stances, DroppedSnippet, StanceOptions, Tally, VerificationError, Veracity,
    VoteRule, VotedSnippet,
};
use crate::datasets::Claim;
use crate::evidence::{
    build_queries, build_queries_from, embed_and_rank, search_all, Blocklist, EvidenceError, RankOptions,
    SearchDiagnostics, SearchOptions, SearchQuery,
};
use crate::providers::{Embedder, NliProvider, SearchProvider};
use crate::questiongen::{generate_questions, Backend, GeneratedQuestionSet, GenerationError, PromptTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generation,
    Search,
    Ranking,
    Stance,
    Aggregation,
    Audit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

/// Coarse error class, used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Validation,
    Provider,
    Internal,
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    fn new(stage: Stage, kind: FailureKind, message: impl fmt::Display) -> Self {
        Self {
            stage,
            kind,
            message: message.to_string(),
        }
    }
}

impl From<GenerationError> for PipelineError {
    fn from(e: GenerationError) -> Self {
        let kind = match e {
            GenerationError::Validation(_) => FailureKind::Validation,
            GenerationError::Provider { .. } => FailureKind::Provider,
        };
        Self::new(Stage::Generation, kind, e)
    }
}

fn evidence_error(stage: Stage, e: EvidenceError) -> PipelineError {
    let kind = match e {
        EvidenceError::Validation(_) => FailureKind::Validation,
        EvidenceError::Retrieval(_) | EvidenceError::Embedding(_) | EvidenceError::Similarity { .. } => {
            FailureKind::Provider
        }
    };
    PipelineError::new(stage, kind, e)
}

fn verification_error(stage: Stage, e: VerificationError) -> PipelineError {
    let kind = match e {
        VerificationError::Validation(_) | VerificationError::NoEvidence => FailureKind::Validation,
        VerificationError::Provider(_) => FailureKind::Provider,
    };
    PipelineError::new(stage, kind, e)
}

/// Where the questions used as extra search queries come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// The claim text is the only query.
    ClaimOnly,
    /// Human-written questions keyed by claim id.
    HumanQuestions {
        name: String,
        questions: Arc<BTreeMap<String, Vec<String>>>,
    },
    /// Questions generated by the named backend.
    Backend(String),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Self::ClaimOnly => "claim_only".into(),
            Self::HumanQuestions { name, .. } => name.clone(),
            Self::Backend(id) => id.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub blocklist: Blocklist,
    pub top_k: usize,
    pub questions_per_claim: usize,
    pub search: SearchOptions,
    pub rank: RankOptions,
    pub stance: StanceOptions,
    pub vote: VoteRule,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            blocklist: Blocklist::fact_checkers(),
            top_k: 20,
            questions_per_claim: 3,
            search: SearchOptions::default(),
            rank: RankOptions::default(),
            stance: StanceOptions::default(),
            vote: VoteRule::default(),
        }
    }
}

/// All providers and settings needed to verify claims.
#[derive(Clone)]
pub struct Pipeline {
    pub backends: BTreeMap<String, Backend>,
    pub search: Vec<Arc<dyn SearchProvider>>,
    pub embedder: Arc<dyn Embedder>,
    pub nli: Arc<dyn NliProvider>,
    pub template: PromptTemplate,
    pub settings: PipelineSettings,
    /// One JSON record per verified claim is written here when set.
    pub audit_dir: Option<PathBuf>,
}

/// Everything produced while verifying one claim with one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub claim: Claim,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated: Option<GeneratedQuestionSet>,
    /// Why the run fell back to claim-only retrieval, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    pub queries: Vec<SearchQuery>,
    pub search: SearchDiagnostics,
    pub retrieved: usize,
    pub dropped: Vec<DroppedSnippet>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim_id: String,
    pub label: Veracity,
    pub supporting_votes: usize,
    pub refuting_votes: usize,
    pub tie_broken: bool,
    pub per_snippet: Vec<VotedSnippet>,
    pub method: String,
}

impl Pipeline {
    pub fn backend(&self, id: &str) -> Option<&Backend> {
        self.backends.get(id)
    }

    pub fn provider_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.search.iter().map(|p| p.name().to_string()).collect();
        names.push(self.embedder.id().to_string());
        names.push(self.nli.id().to_string());
        names.extend(self.backends.keys().cloned());
        names
    }
}

/// Runs the full pipeline for one claim.
pub async fn verify_claim(
    claim: &Claim,
    method: &Method,
    pipeline: &Pipeline,
) -> Result<VerificationRecord, PipelineError> {
    claim
        .validate()
        .map_err(|e| PipelineError::new(Stage::Generation, FailureKind::Validation, e))?;
    let settings = &pipeline.settings;

    let mut generated = None;
    let mut fallback = None;
    let queries = match method {
        Method::ClaimOnly => build_queries(claim, None),
        Method::HumanQuestions { name, questions } => match questions.get(&claim.id) {
            Some(qs) if !qs.is_empty() => build_queries_from(claim, qs),
            _ => {
                fallback = Some(format!("no questions for claim {} in {name}", claim.id));
                build_queries(claim, None)
            }
        },
        Method::Backend(id) => {
            let backend = pipeline.backend(id).ok_or_else(|| {
                PipelineError::new(Stage::Generation, FailureKind::Validation, format!("unknown backend {id:?}"))
            })?;
            let set = generate_questions(claim, backend, &pipeline.template, settings.questions_per_claim).await?;
            if set.is_null() {
                fallback = Some(format!("backend {id} produced a null generation"));
                tracing::info!(claim = %claim.id, backend = %id, "null generation, using claim-only queries");
            }
            let queries = build_queries(claim, Some(&set));
            generated = Some(set);
            queries
        }
    };

    let found = search_all(&queries, &pipeline.search, &settings.blocklist, &settings.search)
        .await
        .map_err(|e| evidence_error(Stage::Search, e))?;
    let retrieved = found.snippets.len();
    let ranked = embed_and_rank(claim, found.snippets, pipeline.embedder.as_ref(), settings.top_k, &settings.rank)
        .await
        .map_err(|e| evidence_error(Stage::Ranking, e))?;
    if ranked.is_empty() {
        return Err(PipelineError::new(
            Stage::Ranking,
            FailureKind::Provider,
            "search returned no usable snippets",
        ));
    }
    let stances = classify_stances(claim, ranked, pipeline.nli.as_ref(), &settings.stance)
        .await
        .map_err(|e| verification_error(Stage::Stance, e))?;
    let labels: Vec<_> = stances.voted.iter().map(|v| v.stance).collect();
    let Tally {
        label,
        supporting_votes,
        refuting_votes,
        tie_broken,
    } = aggregate_verdict(&labels, &settings.vote).map_err(|e| verification_error(Stage::Aggregation, e))?;

    let record = VerificationRecord {
        claim: claim.clone(),
        method: method.name(),
        generated,
        fallback,
        queries,
        search: found.diagnostics,
        retrieved,
        dropped: stances.dropped,
        verdict: Verdict {
            claim_id: claim.id.clone(),
            label,
            supporting_votes,
            refuting_votes,
            tie_broken,
            per_snippet: stances.voted,
            method: method.name(),
        },
    };
    if let Some(dir) = &pipeline.audit_dir {
        persist(dir, &record).map_err(|e| PipelineError::new(Stage::Audit, FailureKind::Internal, e))?;
    }
    Ok(record)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn persist(dir: &std::path::Path, record: &VerificationRecord) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!(
        "{}__{}.json",
        file_safe(&record.claim.id),
        file_safe(&record.method)
    ));
    let body = serde_json::to_string_pretty(record).expect("record serializes");
    std::fs::write(path, body + "\n")
}
