use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{paired_t_test, Metric, MetricsError};

/// One (reference, generation) pair to score. A `None` generation is a null
/// generation and scores 0 on every metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPairInput {
    pub pair_id: String,
    pub reference: String,
    pub generation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair_id: String,
    pub metric: Metric,
    pub value: f64,
    pub null_generation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Corpus-level means over all pairs, nulls included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub means: BTreeMap<Metric, f64>,
    pub n_pairs: usize,
    pub n_null: usize,
    pub per_pair: Vec<PairScore>,
    /// Paired test against `baseline`, per metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub significance: BTreeMap<Metric, Significance>,
}

impl CorpusReport {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.means.get(&metric).copied()
    }

    /// Per-pair values for one metric, keyed by pair id.
    pub fn scores(&self, metric: Metric) -> HashMap<&str, f64> {
        self.per_pair
            .iter()
            .filter(|s| s.metric == metric)
            .map(|s| (s.pair_id.as_str(), s.value))
            .collect()
    }
}

/// Scores every pair with every requested metric and averages per metric.
pub fn corpus_report(pairs: &[ScoredPairInput], metrics: &[Metric]) -> Result<CorpusReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Validation("no pairs to score".into()));
    }
    if metrics.is_empty() {
        return Err(MetricsError::Validation("no metrics requested".into()));
    }
    let mut per_pair = Vec::with_capacity(pairs.len() * metrics.len());
    let mut means = BTreeMap::new();
    for &metric in metrics {
        let mut sum = 0.0;
        for p in pairs {
            let value = match &p.generation {
                Some(g) => metric.score(&p.reference, g),
                None => 0.0,
            };
            sum += value;
            per_pair.push(PairScore {
                pair_id: p.pair_id.clone(),
                metric,
                value,
                null_generation: p.generation.is_none(),
            });
        }
        means.insert(metric, sum / pairs.len() as f64);
    }
    Ok(CorpusReport {
        means,
        n_pairs: pairs.len(),
        n_null: pairs.iter().filter(|p| p.generation.is_none()).count(),
        per_pair,
        baseline: None,
        significance: BTreeMap::new(),
    })
}

/// Single-metric convenience wrapper.
pub fn corpus_metric(pairs: &[ScoredPairInput], metric: Metric) -> Result<CorpusReport, MetricsError> {
    corpus_report(pairs, &[metric])
}

/// Runs a paired t-test per metric between `report` and `baseline` over the
/// pairs both share. Metrics whose differences have zero variance get no
/// entry.
pub fn attach_significance(
    report: &mut CorpusReport,
    baseline_id: &str,
    baseline: &CorpusReport,
    alpha: f64,
) -> Result<(), MetricsError> {
    report.baseline = Some(baseline_id.to_string());
    report.significance.clear();
    let metrics: Vec<Metric> = report.means.keys().copied().collect();
    for metric in metrics {
        let base = baseline.scores(metric);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for s in report.per_pair.iter().filter(|s| s.metric == metric) {
            if let Some(v) = base.get(s.pair_id.as_str()) {
                a.push(s.value);
                b.push(*v);
            }
        }
        match paired_t_test(&a, &b) {
            Ok(test) => {
                report.significance.insert(
                    metric,
                    Significance {
                        t: test.t,
                        p: test.p,
                        significant: test.p <= alpha,
                    },
                );
            }
            Err(MetricsError::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// References and generations for one claim, used by the best-match mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimQuestions {
    pub claim_id: String,
    /// (pair_id, reference question)
    pub references: Vec<(String, String)>,
    /// `None` for a null generation.
    pub generated: Option<Vec<String>>,
}

/// Extension mode: each reference is scored against whichever generated
/// question of the same claim scores highest on that metric. References of
/// claims with a null (or empty) generation score 0.
pub fn best_match_report(claims: &[ClaimQuestions], metrics: &[Metric]) -> Result<CorpusReport, MetricsError> {
    let n_pairs: usize = claims.iter().map(|c| c.references.len()).sum();
    if n_pairs == 0 {
        return Err(MetricsError::Validation("no pairs to score".into()));
    }
    if metrics.is_empty() {
        return Err(MetricsError::Validation("no metrics requested".into()));
    }
    let is_null = |c: &ClaimQuestions| c.generated.as_ref().map_or(true, |g| g.is_empty());
    let mut per_pair = Vec::with_capacity(n_pairs * metrics.len());
    let mut means = BTreeMap::new();
    for &metric in metrics {
        let mut sum = 0.0;
        for c in claims {
            let null = is_null(c);
            for (pair_id, reference) in &c.references {
                let value = c
                    .generated
                    .iter()
                    .flatten()
                    .map(|g| metric.score(reference, g))
                    .fold(0.0, f64::max);
                sum += value;
                per_pair.push(PairScore {
                    pair_id: pair_id.clone(),
                    metric,
                    value,
                    null_generation: null,
                });
            }
        }
        means.insert(metric, sum / n_pairs as f64);
    }
    Ok(CorpusReport {
        means,
        n_pairs,
        n_null: claims.iter().filter(|c| is_null(c)).map(|c| c.references.len()).sum(),
        per_pair,
        baseline: None,
        significance: BTreeMap::new(),
    })
}
