use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 5;
const K: usize = (SCALE_MAX - SCALE_MIN + 1) as usize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaWeighting {
    Linear,
    #[default]
    Quadratic,
}

impl KappaWeighting {
    /// Disagreement weight for scale positions `i`, `j` (0-based).
    pub fn weight(self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j) as f64 / (K - 1) as f64;
        match self {
            Self::Linear => d,
            Self::Quadratic => d * d,
        }
    }
}

impl std::str::FromStr for KappaWeighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(format!("unknown kappa weighting {other:?}")),
        }
    }
}

fn check_rating(r: u8) -> Result<usize, MetricsError> {
    if (SCALE_MIN..=SCALE_MAX).contains(&r) {
        Ok((r - SCALE_MIN) as usize)
    } else {
        Err(MetricsError::Validation(format!("rating {r} outside {SCALE_MIN}..={SCALE_MAX}")))
    }
}

/// Weighted Cohen's kappa on the fixed 1..=5 scale.
pub fn weighted_kappa(a: &[u8], b: &[u8], weighting: KappaWeighting) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Validation(format!("rating vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(MetricsError::Validation(format!("need at least 2 paired ratings, got {}", a.len())));
    }
    let n = a.len() as f64;
    let mut observed = [[0.0f64; K]; K];
    let mut row = [0.0f64; K];
    let mut col = [0.0f64; K];
    for (&x, &y) in a.iter().zip(b) {
        let (i, j) = (check_rating(x)?, check_rating(y)?);
        observed[i][j] += 1.0 / n;
        row[i] += 1.0 / n;
        col[j] += 1.0 / n;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..K {
        for j in 0..K {
            let w = weighting.weight(i, j);
            num += w * observed[i][j];
            den += w * row[i] * col[j];
        }
    }
    if den == 0.0 {
        return Err(MetricsError::Degenerate(
            "chance-expected disagreement is zero (both annotators used one identical rating)".into(),
        ));
    }
    Ok(1.0 - num / den)
}

fn default_model() -> String {
    "default".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub claim_id: String,
    pub question_id: String,
    pub annotator_id: String,
    /// Question generator being rated.
    #[serde(default = "default_model")]
    pub model: String,
    pub usefulness: u8,
    pub coverage: u8,
    pub fluency: u8,
}

impl AnnotationRecord {
    fn ratings(&self) -> [u8; 3] {
        [self.usefulness, self.coverage, self.fluency]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub items: usize,
    pub usefulness: f64,
    pub coverage: f64,
    pub fluency: f64,
    /// Kappa over the paired ratings of all three dimensions.
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualEvalReport {
    pub weighting: KappaWeighting,
    pub models: BTreeMap<String, ModelEvaluation>,
}

/// Per-model rating means and weighted kappa. Every (model, claim, question)
/// item must carry ratings from exactly two distinct annotators.
pub fn manual_eval_report(
    annotations: &[AnnotationRecord],
    weighting: KappaWeighting,
) -> Result<ManualEvalReport, MetricsError> {
    if annotations.is_empty() {
        return Err(MetricsError::Validation("no annotations".into()));
    }
    let mut items: BTreeMap<(&str, &str, &str), Vec<&AnnotationRecord>> = BTreeMap::new();
    for rec in annotations {
        for r in rec.ratings() {
            check_rating(r).map_err(|e| {
                MetricsError::Validation(format!("{}/{} by {}: {e}", rec.claim_id, rec.question_id, rec.annotator_id))
            })?;
        }
        items
            .entry((rec.model.as_str(), rec.claim_id.as_str(), rec.question_id.as_str()))
            .or_default()
            .push(rec);
    }

    let mut bad = Vec::new();
    for ((model, claim, question), recs) in &mut items {
        recs.sort_by(|x, y| x.annotator_id.cmp(&y.annotator_id));
        let distinct = recs.windows(2).all(|w| w[0].annotator_id != w[1].annotator_id);
        if recs.len() != 2 || !distinct {
            bad.push(format!("{model}/{claim}/{question} ({} ratings)", recs.len()));
        }
    }
    if !bad.is_empty() {
        return Err(MetricsError::Validation(format!(
            "items without exactly two annotators: {}",
            bad.join(", ")
        )));
    }

    let mut models = BTreeMap::new();
    let mut by_model: BTreeMap<&str, Vec<&Vec<&AnnotationRecord>>> = BTreeMap::new();
    for ((model, _, _), recs) in &items {
        by_model.entry(model).or_default().push(recs);
    }
    for (model, pairs) in by_model {
        let mut sums = [0.0f64; 3];
        let mut a = Vec::with_capacity(pairs.len() * 3);
        let mut b = Vec::with_capacity(pairs.len() * 3);
        for recs in &pairs {
            for rec in recs.iter() {
                for (s, r) in sums.iter_mut().zip(rec.ratings()) {
                    *s += r as f64;
                }
            }
            a.extend(recs[0].ratings());
            b.extend(recs[1].ratings());
        }
        let count = (pairs.len() * 2) as f64;
        let (kappa, kappa_note) = match weighted_kappa(&a, &b, weighting) {
            Ok(k) => (Some(k), None),
            Err(e) => (None, Some(e.to_string())),
        };
        models.insert(
            model.to_string(),
            ModelEvaluation {
                items: pairs.len(),
                usefulness: sums[0] / count,
                coverage: sums[1] / count,
                fluency: sums[2] / count,
                kappa,
                kappa_note,
            },
        );
    }
    Ok(ManualEvalReport { weighting, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str, annotator: &str, r: [u8; 3]) -> AnnotationRecord {
        AnnotationRecord {
            claim_id: "c".into(),
            question_id: q.into(),
            annotator_id: annotator.into(),
            model: "m".into(),
            usefulness: r[0],
            coverage: r[1],
            fluency: r[2],
        }
    }

    #[test]
    fn perfect_agreement() {
        for w in [KappaWeighting::Linear, KappaWeighting::Quadratic] {
            assert!((weighted_kappa(&[1, 3, 5, 2], &[1, 3, 5, 2], w).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_scale_is_negative() {
        let a = [1, 3, 5];
        let b = [5, 3, 1];
        let k = weighted_kappa(&a, &b, KappaWeighting::Quadratic).unwrap();
        // O puts mass 1/3 on (1,5),(3,3),(5,1); marginals uniform over {1,3,5}
        // sum wO = 2/3, sum wE = (1/9) * (0+.25+1 + .25+0+.25 + 1+.25+0) = 1/3
        assert!((k - (1.0 - 2.0)).abs() < 1e-12, "{k}");
    }

    #[test]
    fn constant_identical_is_undefined() {
        assert!(matches!(
            weighted_kappa(&[4, 4, 4], &[4, 4, 4], KappaWeighting::Quadratic),
            Err(MetricsError::Degenerate(_))
        ));
        // different constants: expected disagreement equals observed
        assert_eq!(weighted_kappa(&[4, 4], &[3, 3], KappaWeighting::Linear).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(weighted_kappa(&[0, 1], &[1, 1], KappaWeighting::Linear).is_err());
        assert!(weighted_kappa(&[1, 6], &[1, 1], KappaWeighting::Linear).is_err());
        assert!(weighted_kappa(&[1], &[1], KappaWeighting::Linear).is_err());
        assert!(weighted_kappa(&[1, 2], &[1], KappaWeighting::Linear).is_err());
    }

    #[test]
    fn single_item_report() {
        let r = manual_eval_report(&[rec("q", "x", [4, 4, 4]), rec("q", "y", [4, 4, 4])], KappaWeighting::Quadratic).unwrap();
        let m = &r.models["m"];
        assert_eq!((m.usefulness, m.coverage, m.fluency), (4.0, 4.0, 4.0));
        assert!(m.kappa.is_none() && m.kappa_note.is_some());
    }

    #[test]
    fn midpoints() {
        let anns = [
            rec("q1", "x", [3, 4, 5]),
            rec("q1", "y", [4, 5, 4]),
            rec("q2", "x", [2, 1, 3]),
            rec("q2", "y", [1, 2, 2]),
        ];
        let m = &manual_eval_report(&anns, KappaWeighting::Quadratic).unwrap().models["m"];
        assert_eq!((m.usefulness, m.coverage, m.fluency), (2.5, 3.0, 3.5));
        assert!(m.kappa.is_some());
    }

    #[test]
    fn missing_annotator_listed() {
        let anns = [rec("q1", "x", [3, 3, 3]), rec("q1", "y", [3, 3, 3]), rec("q2", "x", [3, 3, 3])];
        let err = manual_eval_report(&anns, KappaWeighting::Quadratic).unwrap_err().to_string();
        assert!(err.contains("m/c/q2") && !err.contains("q1"), "{err}");
        let dup = [rec("q1", "x", [3, 3, 3]), rec("q1", "x", [3, 3, 3])];
        assert!(manual_eval_report(&dup, KappaWeighting::Quadratic).is_err());
    }
}
