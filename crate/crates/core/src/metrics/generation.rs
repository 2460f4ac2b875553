//! Surface-overlap metrics between a generated question and a reference
//! question: ROUGE-N, ROUGE-L (F-measure) and smoothed sentence BLEU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercased tokens. Only [`tokenize`] builds these, so every metric sees
/// the same normalization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '`' | '(' | ')' | '[' | ']' | '{' | '}' | '<' | '>'
            | '-' | '–' | '—' | '…' | '“' | '”' | '‘' | '’' | '«' | '»'
    )
}

/// Lowercases, splits on whitespace and strips leading and trailing
/// punctuation from each token. Tokens that were pure punctuation vanish.
/// Interior punctuation (`u.s`, `don't`) and symbols such as `%` or `$`
/// are kept.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.split_whitespace()
            .map(|w| w.trim_matches(is_edge_punct).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect(),
    )
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and the candidate's n-gram total.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matches = cand
        .iter()
        .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

fn f1(overlap: f64, cand_total: f64, ref_total: f64) -> f64 {
    if overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0 {
        return 0.0;
    }
    let p = overlap / cand_total;
    let r = overlap / ref_total;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F-measure.
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    let (overlap, cand_total) = clipped_matches(&candidate.0, &reference.0, n);
    let ref_total = reference.len().saturating_sub(n - 1);
    f1(overlap as f64, cand_total as f64, ref_total as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure from the longest common subsequence.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let lcs = lcs_len(&candidate.0, &reference.0);
    f1(lcs as f64, candidate.len() as f64, reference.len() as f64)
}

/// Sentence-level BLEU with uniform weights over orders `1..=max_n`.
///
/// Modified precision for order 1 is unsmoothed, so no unigram overlap
/// means 0. For orders >= 2 a zero match count is smoothed to
/// `1 / (total + 1)`. The brevity penalty is `exp(1 - |ref| / |cand|)` when
/// the candidate is shorter than the reference.
pub fn bleu(candidate: &TokenSequence, reference: &TokenSequence, max_n: usize) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matches, total) = clipped_matches(&candidate.0, &reference.0, n);
        let precision = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += precision.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    brevity * (log_sum / max_n as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rougeL")]
    RougeL,
    Bleu,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rouge1, Metric::RougeL, Metric::Bleu];

    pub fn label(self) -> &'static str {
        match self {
            Self::Rouge1 => "R-1",
            Self::RougeL => "R-L",
            Self::Bleu => "BLEU",
        }
    }

    /// Scores generation `g` against reference `q` (raw text).
    pub fn score(self, reference: &str, generation: &str) -> f64 {
        let (r, g) = (tokenize(reference), tokenize(generation));
        match self {
            Self::Rouge1 => rouge_n(&g, &r, 1),
            Self::RougeL => rouge_l(&g, &r),
            Self::Bleu => bleu(&g, &r, 4),
        }
    }
}
