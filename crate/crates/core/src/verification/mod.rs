//! Stance classification of (claim, snippet) pairs and majority-vote
//! aggregation into a veracity verdict.

mod pipeline;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Claim;
use crate::evidence::EvidenceSnippet;
use crate::providers::{CallPolicy, NliPair, NliProvider, ProviderError};

pub use pipeline::{
    verify_claim, FailureKind, Method, Pipeline, PipelineError, PipelineSettings, Stage,
    VerificationRecord,
};

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("invalid verification request: {0}")]
    Validation(String),
    #[error("NLI provider failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("no stances to aggregate: the claim has no usable evidence")]
    NoEvidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Supporting,
    Refuting,
}

impl Stance {
    /// Maps an NLI label onto the binary stance contract. Neutral and
    /// unknown labels map to `None`.
    pub fn from_nli_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "supporting" | "support" | "supports" | "supported" | "entailment" | "entails" | "true" => {
                Some(Self::Supporting)
            }
            "refuting" | "refute" | "refutes" | "refuted" | "contradiction" | "contradicts" | "false" => {
                Some(Self::Refuting)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceLabel {
    pub stance: Stance,
    pub confidence: f64,
}

impl StanceLabel {
    pub fn supporting(confidence: f64) -> Self {
        Self { stance: Stance::Supporting, confidence }
    }

    pub fn refuting(confidence: f64) -> Self {
        Self { stance: Stance::Refuting, confidence }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Veracity {
    True,
    False,
}

impl Veracity {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Self::True
        } else {
            Self::False
        }
    }

    pub fn as_bool(self) -> bool {
        self == Self::True
    }
}

impl fmt::Display for Veracity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::True => "true",
            Self::False => "false",
        })
    }
}

/// How an exact tie between the two sides is resolved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Higher mean confidence wins; equal means give `False`.
    #[default]
    MeanConfidence,
    AlwaysFalse,
    AlwaysTrue,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteWeighting {
    /// One vote per snippet.
    #[default]
    Equal,
    /// Each vote counts its confidence.
    Confidence,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteRule {
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub weighting: VoteWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub label: Veracity,
    pub supporting_votes: usize,
    pub refuting_votes: usize,
    /// True when the tie rule decided the label.
    pub tie_broken: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Majority vote over per-snippet stances.
pub fn aggregate_verdict(stances: &[StanceLabel], rule: &VoteRule) -> Result<Tally, VerificationError> {
    if stances.is_empty() {
        return Err(VerificationError::NoEvidence);
    }
    let supporting_votes = stances.iter().filter(|s| s.stance == Stance::Supporting).count();
    let refuting_votes = stances.len() - supporting_votes;
    let side = |stance: Stance| stances.iter().filter(move |s| s.stance == stance).map(|s| s.confidence);

    let (for_weight, against_weight) = match rule.weighting {
        VoteWeighting::Equal => (supporting_votes as f64, refuting_votes as f64),
        VoteWeighting::Confidence => (
            side(Stance::Supporting).sum::<f64>(),
            side(Stance::Refuting).sum::<f64>(),
        ),
    };
    let (label, tie_broken) = if for_weight > against_weight {
        (Veracity::True, false)
    } else if against_weight > for_weight {
        (Veracity::False, false)
    } else {
        let label = match rule.tie_break {
            TieBreak::AlwaysFalse => Veracity::False,
            TieBreak::AlwaysTrue => Veracity::True,
            TieBreak::MeanConfidence => {
                let (ms, mr) = (mean(side(Stance::Supporting)), mean(side(Stance::Refuting)));
                Veracity::from_bool(ms > mr)
            }
        };
        tracing::info!(supporting_votes, refuting_votes, ?label, "vote tie resolved by tie rule");
        (label, true)
    };
    Ok(Tally {
        label,
        supporting_votes,
        refuting_votes,
        tie_broken,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotedSnippet {
    pub snippet: EvidenceSnippet,
    pub stance: StanceLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSnippet {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceOutcome {
    pub voted: Vec<VotedSnippet>,
    pub dropped: Vec<DroppedSnippet>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceOptions {
    /// Pairs per NLI request.
    pub batch_size: usize,
    pub policy: CallPolicy,
}

impl Default for StanceOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            policy: CallPolicy::default(),
        }
    }
}

/// Classifies each snippet (premise) against the claim (hypothesis). Input
/// order is preserved. Snippets whose prediction cannot be mapped onto a
/// binary stance, or whose score is not a probability, are dropped and
/// listed in `dropped`.
pub async fn classify_stances(
    claim: &Claim,
    snippets: Vec<EvidenceSnippet>,
    nli: &dyn NliProvider,
    options: &StanceOptions,
) -> Result<StanceOutcome, VerificationError> {
    if snippets.is_empty() {
        return Err(VerificationError::Validation("no snippets to classify".into()));
    }
    let mut outcome = StanceOutcome {
        voted: Vec::with_capacity(snippets.len()),
        dropped: Vec::new(),
    };
    let batch_size = options.batch_size.max(1);
    let mut rest = snippets;
    while !rest.is_empty() {
        let tail = rest.split_off(batch_size.min(rest.len()));
        let batch = std::mem::replace(&mut rest, tail);
        let pairs: Vec<NliPair> = batch
            .iter()
            .map(|s| NliPair {
                premise: s.text.clone(),
                hypothesis: claim.text.clone(),
            })
            .collect();
        let predictions = options.policy.run(nli.id(), || nli.classify(&pairs)).await?;
        if predictions.len() != batch.len() {
            return Err(ProviderError::protocol(
                nli.id(),
                format!("{} predictions for {} pairs", predictions.len(), batch.len()),
            )
            .into());
        }
        for (snippet, prediction) in batch.into_iter().zip(predictions) {
            let confidence = prediction.score.unwrap_or(1.0);
            let stance = Stance::from_nli_label(&prediction.label);
            match stance {
                Some(stance) if (0.0..=1.0).contains(&confidence) => outcome.voted.push(VotedSnippet {
                    snippet,
                    stance: StanceLabel { stance, confidence },
                }),
                _ => {
                    let reason = if stance.is_none() {
                        format!("label {:?} is not a supporting/refuting stance", prediction.label)
                    } else {
                        format!("score {confidence} outside [0, 1]")
                    };
                    tracing::warn!(url = %snippet.url, %reason, "snippet dropped from vote");
                    outcome.dropped.push(DroppedSnippet { url: snippet.url, reason });
                }
            }
        }
    }
    Ok(outcome)
}
