//! Evaluation math: generation overlap metrics, corpus averaging, veracity
//! classification scores, paired t-tests and rating agreement.

mod agreement;
mod classification;
mod corpus;
mod generation;
mod significance;

pub use agreement::{manual_eval_report, weighted_kappa, AnnotationRecord, KappaWeighting, ManualEvalReport, ModelEvaluation};
pub use classification::{classification_report, ClassCounts, ClassificationReport};
pub use corpus::{
    attach_significance, best_match_report, corpus_metric, corpus_report, ClaimQuestions, CorpusReport, PairScore,
    ScoredPairInput, Significance,
};
pub use generation::{bleu, rouge_l, rouge_n, tokenize, Metric, TokenSequence};
pub use significance::{paired_t_test, TTest};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
}
