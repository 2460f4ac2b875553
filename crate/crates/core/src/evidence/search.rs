use std::collections::HashSet;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

use super::{Blocklist, EvidenceError, EvidenceSnippet, SearchQuery};
use crate::providers::{CallPolicy, SearchHit, SearchProvider, SearchRequest};
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_results: usize,
    /// Maximum number of provider requests in flight.
    pub parallelism: usize,
    pub policy: CallPolicy,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_results: 10,
            parallelism: 8,
            policy: CallPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestFailure {
    pub provider: String,
    pub query_index: usize,
    pub error: String,
}

/// Coverage and filtering counts for one retrieval.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub requests: usize,
    pub succeeded: usize,
    pub failures: Vec<RequestFailure>,
    pub blocklisted: usize,
    pub invalid: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub snippets: Vec<EvidenceSnippet>,
    pub diagnostics: SearchDiagnostics,
}

/// Sends every query to every provider, then merges the results in
/// (query, provider, rank) order regardless of completion order. Blocked
/// domains, hits without text or with malformed URLs, and repeated
/// (url, normalized text) pairs are dropped. Fails only if no request
/// succeeded.
pub async fn search_all(
    queries: &[SearchQuery],
    providers: &[Arc<dyn SearchProvider>],
    blocklist: &Blocklist,
    options: &SearchOptions,
) -> Result<SearchOutcome, EvidenceError> {
    if queries.is_empty() {
        return Err(EvidenceError::Validation("no queries".into()));
    }
    if providers.is_empty() {
        return Err(EvidenceError::Validation("no search providers configured".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..queries.len())
        .flat_map(|q| (0..providers.len()).map(move |p| (q, p)))
        .collect();
    let mut responses: Vec<_> = stream::iter(jobs)
        .map(|(qi, pi)| {
            let provider = providers[pi].clone();
            let request = SearchRequest {
                query: queries[qi].text.clone(),
                max_results: options.max_results,
            };
            let policy = options.policy;
            async move {
                let name = provider.name().to_string();
                let result = policy.run(&name, || provider.search(&request)).await;
                (qi, pi, result)
            }
        })
        .buffer_unordered(options.parallelism.max(1))
        .collect()
        .await;
    responses.sort_by_key(|(qi, pi, _)| (*qi, *pi));

    let mut diagnostics = SearchDiagnostics {
        requests: responses.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut snippets = Vec::new();
    for (qi, pi, result) in responses {
        let provider = providers[pi].name();
        let hits = match result {
            Ok(hits) => {
                diagnostics.succeeded += 1;
                hits
            }
            Err(e) => {
                tracing::warn!(provider, query = qi, error = %e, "search request failed");
                diagnostics.failures.push(RequestFailure {
                    provider: provider.to_string(),
                    query_index: qi,
                    error: e.to_string(),
                });
                continue;
            }
        };
        for SearchHit { title, url, snippet } in hits {
            let text = normalize_whitespace(&snippet);
            if text.is_empty() || Url::parse(&url).is_err() {
                diagnostics.invalid += 1;
                continue;
            }
            if blocklist.is_blocked(&url) {
                diagnostics.blocklisted += 1;
                continue;
            }
            if !seen.insert((url.clone(), text.clone())) {
                diagnostics.duplicates += 1;
                continue;
            }
            snippets.push(EvidenceSnippet {
                text,
                url,
                title: title.trim().to_string(),
                provider: provider.to_string(),
                query: queries[qi].clone(),
                similarity: None,
            });
        }
    }
    if diagnostics.succeeded == 0 {
        return Err(EvidenceError::Retrieval(format!(
            "all {} search requests failed (first: {})",
            diagnostics.requests,
            diagnostics.failures.first().map(|f| f.error.as_str()).unwrap_or("none")
        )));
    }
    Ok(SearchOutcome { snippets, diagnostics })
}
