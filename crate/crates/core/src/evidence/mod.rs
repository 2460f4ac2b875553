//! Evidence retrieval: query construction, multi-engine search with a
//! leakage blocklist and deduplication, and embedding-based top-k ranking.

mod blocklist;
mod rank;
mod search;
mod similarity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Claim;
use crate::providers::ProviderError;
use crate::questiongen::GeneratedQuestionSet;

pub use blocklist::Blocklist;
pub use rank::{embed_and_rank, RankAnchor, RankOptions};
pub use search::{search_all, RequestFailure, SearchDiagnostics, SearchOptions, SearchOutcome};
pub use similarity::{cosine_similarity, EmbeddingVector, SimilarityError};

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("invalid retrieval request: {0}")]
    Validation(String),
    #[error("retrieval failed: {0}")]
    Retrieval(String),
    #[error("embedding provider failed: {0}")]
    Embedding(#[source] ProviderError),
    #[error("similarity computation failed for {what}: {source}")]
    Similarity {
        what: String,
        #[source]
        source: SimilarityError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum QueryOrigin {
    Claim,
    Question(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub origin: QueryOrigin,
}

/// A retrieved passage with its provenance. `similarity` is filled in by
/// ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub text: String,
    pub url: String,
    pub title: String,
    pub provider: String,
    pub query: SearchQuery,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

/// The claim first, then one query per generated question in order. A null
/// or absent question set yields the claim-only query list. Questions
/// repeating the claim are kept; duplicates are removed at the snippet level.
pub fn build_queries(claim: &Claim, questions: Option<&GeneratedQuestionSet>) -> Vec<SearchQuery> {
    let mut queries = vec![SearchQuery {
        text: claim.text.trim().to_string(),
        origin: QueryOrigin::Claim,
    }];
    if let Some(set) = questions {
        queries.extend(
            set.questions()
                .iter()
                .enumerate()
                .filter(|(_, q)| !q.trim().is_empty())
                .map(|(i, q)| SearchQuery {
                    text: q.trim().to_string(),
                    origin: QueryOrigin::Question(i),
                }),
        );
    }
    queries
}

/// Query list from plain question strings (e.g. human-written questions).
pub fn build_queries_from(claim: &Claim, questions: &[String]) -> Vec<SearchQuery> {
    let set = GeneratedQuestionSet {
        claim_id: claim.id.clone(),
        questions: Some(questions.to_vec()),
        backend_id: String::new(),
        sampling: None,
        raw_responses: Vec::new(),
    };
    build_queries(claim, Some(&set))
}
