//! Decomposition-question generation: prompt construction, sampling
//! parameters, structured-output parsing with null handling, and synthetic
//! dataset generation.

mod parse;
mod sampling;
mod synthesize;
mod template;

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Claim;
use crate::providers::{CallPolicy, GenerationRequest, Generator, ProviderError};
use crate::text::normalize_whitespace;

pub use parse::parse_generation;
pub use sampling::SamplingConfig;
pub use synthesize::{synthesize_dataset, SynthesisOptions, SynthesisReport};
pub use template::{build_prompt, PromptTemplate, EXEMPLAR_END};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generation request: {0}")]
    Validation(String),
    #[error("backend {backend} failed: {source}")]
    Provider {
        backend: String,
        #[source]
        source: ProviderError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Small encoder-decoder models fine-tuned on claim -> question pairs.
    FineTunedSeq2seq,
    /// Instruction-following LLMs prompted one-shot.
    InstructionLlm,
}

/// Static description of a generation backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub id: String,
    pub kind: BackendKind,
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Overrides the per-kind default sampling parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
}

fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    500
}

impl BackendDescriptor {
    pub fn new(id: impl Into<String>, kind: BackendKind, endpoint: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            endpoint: endpoint.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            sampling: None,
        }
    }

    pub fn call_policy(&self) -> CallPolicy {
        CallPolicy {
            timeout: Duration::from_millis(self.timeout_ms),
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
        }
    }

    /// Sampling parameters to transmit. Fine-tuned models get the fixed
    /// inference settings; instruction LLMs get the serving stack's defaults
    /// (nothing sent) unless overridden.
    pub fn effective_sampling(&self) -> Option<SamplingConfig> {
        match (self.sampling, self.kind) {
            (Some(s), _) => Some(s),
            (None, BackendKind::FineTunedSeq2seq) => Some(SamplingConfig::seq2seq_default()),
            (None, BackendKind::InstructionLlm) => None,
        }
    }
}

/// A descriptor bound to a live (or scripted) client.
#[derive(Clone)]
pub struct Backend {
    pub descriptor: BackendDescriptor,
    pub client: Arc<dyn Generator>,
}

impl Backend {
    pub fn new(descriptor: BackendDescriptor, client: Arc<dyn Generator>) -> Self {
        Self { descriptor, client }
    }

    pub fn id(&self) -> &str {
        &self.descriptor.id
    }
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("descriptor", &self.descriptor)
            .field("client", &self.client.id())
            .finish()
    }
}

/// Questions produced for one claim by one backend. `questions` is `None`
/// for a null generation; the raw responses are kept either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuestionSet {
    pub claim_id: String,
    pub questions: Option<Vec<String>>,
    pub backend_id: String,
    pub sampling: Option<SamplingConfig>,
    pub raw_responses: Vec<String>,
}

impl GeneratedQuestionSet {
    pub fn is_null(&self) -> bool {
        self.questions.is_none()
    }

    /// The questions, or an empty slice for a null set.
    pub fn questions(&self) -> &[String] {
        self.questions.as_deref().unwrap_or_default()
    }
}

/// Draws up to `n` samples from the backend and keeps at most `n` unique
/// questions in generation order. Sampling stops early once `n` questions
/// are collected. Null only if no sample conformed.
pub async fn generate_questions(
    claim: &Claim,
    backend: &Backend,
    template: &PromptTemplate,
    n: usize,
) -> Result<GeneratedQuestionSet, GenerationError> {
    if n == 0 {
        return Err(GenerationError::Validation("question count must be at least 1".into()));
    }
    claim.validate().map_err(GenerationError::Validation)?;
    let kind = backend.descriptor.kind;
    let sampling = backend.descriptor.effective_sampling();
    let prompt = build_prompt(claim, template, kind);
    let policy = backend.descriptor.call_policy();

    let mut seen = HashSet::new();
    let mut questions = Vec::new();
    let mut raw_responses = Vec::new();
    let mut any_conforming = false;
    for sample_index in 0..n as u32 {
        if questions.len() >= n {
            break;
        }
        let request = GenerationRequest {
            prompt: prompt.clone(),
            sampling,
            sample_index,
        };
        let raw = policy
            .run(backend.id(), || backend.client.generate(&request))
            .await
            .map_err(|source| GenerationError::Provider {
                backend: backend.id().to_string(),
                source,
            })?;
        if let Some(parsed) = parse_generation(&raw, kind) {
            any_conforming = true;
            for q in parsed {
                if questions.len() < n && seen.insert(normalize_whitespace(&q)) {
                    questions.push(q);
                }
            }
        }
        raw_responses.push(raw);
    }

    Ok(GeneratedQuestionSet {
        claim_id: claim.id.clone(),
        questions: any_conforming.then_some(questions),
        backend_id: backend.id().to_string(),
        sampling,
        raw_responses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scripted::ScriptedGenerator;

    fn backend(kind: BackendKind, script: Vec<&str>) -> Backend {
        Backend::new(
            BackendDescriptor::new("mock", kind, "scripted://mock"),
            Arc::new(ScriptedGenerator::sequence("mock", script)),
        )
    }

    fn claim() -> Claim {
        Claim::new("c1", "The claim.").unwrap()
    }

    #[tokio::test]
    async fn repeated_question_deduplicated() {
        let b = backend(BackendKind::FineTunedSeq2seq, vec!["Same?", " Same? ", "Same?"]);
        let set = generate_questions(&claim(), &b, &PromptTemplate::default(), 3).await.unwrap();
        assert_eq!(set.questions, Some(vec!["Same?".to_string()]));
        assert_eq!(set.raw_responses.len(), 3);
        assert_eq!(set.sampling, Some(SamplingConfig::seq2seq_default()));
    }

    #[tokio::test]
    async fn prose_only_is_null() {
        let b = backend(BackendKind::InstructionLlm, vec!["no json here", "still prose"]);
        let set = generate_questions(&claim(), &b, &PromptTemplate::default(), 2).await.unwrap();
        assert!(set.is_null());
        assert_eq!(set.raw_responses, ["no json here", "still prose"]);
        assert_eq!(set.sampling, None);
    }

    #[tokio::test]
    async fn distinct_outputs_in_order() {
        let b = backend(BackendKind::FineTunedSeq2seq, vec!["A?", "B?", "C?"]);
        let set = generate_questions(&claim(), &b, &PromptTemplate::default(), 3).await.unwrap();
        assert_eq!(set.questions(), ["A?", "B?", "C?"]);
    }

    #[tokio::test]
    async fn llm_batch_truncated_to_n_and_stops_early() {
        let b = backend(
            BackendKind::InstructionLlm,
            vec![r#"{"questions": ["a?", "b?", "c?", "d?"]}"#, r#"{"questions": ["e?"]}"#],
        );
        let set = generate_questions(&claim(), &b, &PromptTemplate::default(), 3).await.unwrap();
        assert_eq!(set.questions(), ["a?", "b?", "c?"]);
        assert_eq!(set.raw_responses.len(), 1);
    }

    #[tokio::test]
    async fn one_conforming_sample_is_enough() {
        let b = backend(BackendKind::InstructionLlm, vec!["prose", r#"{"questions": ["x?"]}"#]);
        let set = generate_questions(&claim(), &b, &PromptTemplate::default(), 2).await.unwrap();
        assert_eq!(set.questions(), ["x?"]);
    }

    #[tokio::test]
    async fn zero_count_rejected() {
        let b = backend(BackendKind::InstructionLlm, vec![]);
        assert!(matches!(
            generate_questions(&claim(), &b, &PromptTemplate::default(), 0).await,
            Err(GenerationError::Validation(_))
        ));
    }

    #[tokio::test]
    async fn provider_failure_carries_backend_id() {
        let mut descriptor = BackendDescriptor::new("down", BackendKind::InstructionLlm, "x");
        descriptor.max_retries = 1;
        descriptor.backoff_ms = 1;
        let b = Backend::new(descriptor, Arc::new(ScriptedGenerator::failing("down")));
        match generate_questions(&claim(), &b, &PromptTemplate::default(), 1).await {
            Err(GenerationError::Provider { backend, source }) => {
                assert_eq!(backend, "down");
                assert!(source.is_transient());
            }
            other => panic!("{other:?}"),
        }
    }
}
