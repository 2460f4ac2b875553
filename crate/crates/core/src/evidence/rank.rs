use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{cosine_similarity, EmbeddingVector, EvidenceError, EvidenceSnippet};
use crate::datasets::Claim;
use crate::providers::{CallPolicy, Embedder};

/// Text each snippet is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankAnchor {
    /// The claim text, shared by all queries of all methods.
    #[default]
    Claim,
    /// The query that retrieved the snippet.
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    pub anchor: RankAnchor,
    /// Texts per embedding request.
    pub batch_size: usize,
    pub policy: CallPolicy,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            anchor: RankAnchor::Claim,
            batch_size: 64,
            policy: CallPolicy::default(),
        }
    }
}

/// Scores each snippet by cosine similarity to the anchor embedding and
/// keeps the `k` best. Ties are ordered by (provider, url, text). Returns
/// fewer than `k` snippets when the pool is smaller.
pub async fn embed_and_rank(
    claim: &Claim,
    snippets: Vec<EvidenceSnippet>,
    embedder: &dyn Embedder,
    k: usize,
    options: &RankOptions,
) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
    if k == 0 {
        return Err(EvidenceError::Validation("k must be at least 1".into()));
    }
    if snippets.is_empty() {
        return Ok(Vec::new());
    }

    // Unique texts in first-seen order; each is embedded once.
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut texts: Vec<String> = Vec::new();
    let mut intern = |t: &str| -> usize {
        *index.entry(t.to_string()).or_insert_with(|| {
            texts.push(t.to_string());
            texts.len() - 1
        })
    };
    let claim_idx = intern(claim.text.trim());
    let anchors: Vec<usize> = snippets
        .iter()
        .map(|s| match options.anchor {
            RankAnchor::Claim => claim_idx,
            RankAnchor::Query => intern(&s.query.text),
        })
        .collect();
    let bodies: Vec<usize> = snippets.iter().map(|s| intern(&s.text)).collect();

    let vectors = embed_all(embedder, &texts, options).await?;

    let mut scored: Vec<EvidenceSnippet> = snippets
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            let sim = cosine_similarity(&vectors[bodies[i]], &vectors[anchors[i]]).map_err(|source| {
                EvidenceError::Similarity {
                    what: s.url.clone(),
                    source,
                }
            })?;
            s.similarity = Some(sim);
            Ok(s)
        })
        .collect::<Result<_, EvidenceError>>()?;

    scored.sort_by(compare_ranked);
    scored.truncate(k);
    Ok(scored)
}

fn compare_ranked(a: &EvidenceSnippet, b: &EvidenceSnippet) -> Ordering {
    let sa = a.similarity.unwrap_or(f64::NEG_INFINITY);
    let sb = b.similarity.unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa)
        .then_with(|| a.provider.cmp(&b.provider))
        .then_with(|| a.url.cmp(&b.url))
        .then_with(|| a.text.cmp(&b.text))
}

async fn embed_all(
    embedder: &dyn Embedder,
    texts: &[String],
    options: &RankOptions,
) -> Result<Vec<EmbeddingVector>, EvidenceError> {
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(options.batch_size.max(1)) {
        let raw = options
            .policy
            .run(embedder.id(), || embedder.embed(batch))
            .await
            .map_err(EvidenceError::Embedding)?;
        if raw.len() != batch.len() {
            return Err(EvidenceError::Retrieval(format!(
                "embedder {} returned {} vectors for {} texts",
                embedder.id(),
                raw.len(),
                batch.len()
            )));
        }
        for (text, values) in batch.iter().zip(raw) {
            let v = EmbeddingVector::new(values).map_err(|source| EvidenceError::Similarity {
                what: format!("embedding of {text:?}"),
                source,
            })?;
            out.push(v);
        }
    }
    if let Some(first) = out.first() {
        let dim = first.dimension();
        if let Some(bad) = out.iter().find(|v| v.dimension() != dim) {
            return Err(EvidenceError::Similarity {
                what: "embedding batch".into(),
                source: super::SimilarityError::DimensionMismatch(dim, bad.dimension()),
            });
        }
    }
    Ok(out)
}
