use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::verification::Veracity;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    /// F1 from one-vs-rest counts. A class that appears in neither gold nor
    /// predictions has nothing to get wrong and scores 1.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_class_f1: BTreeMap<Veracity, f64>,
    /// `confusion[gold][predicted]`
    pub confusion: BTreeMap<Veracity, BTreeMap<Veracity, usize>>,
    pub per_class: BTreeMap<Veracity, ClassCounts>,
    pub n: usize,
}

impl ClassificationReport {
    pub fn class_f1(&self, label: Veracity) -> f64 {
        self.per_class_f1.get(&label).copied().unwrap_or(0.0)
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = self.per_class.values().map(|c| c.tp).sum();
        correct as f64 / self.n as f64
    }
}

const LABELS: [Veracity; 2] = [Veracity::True, Veracity::False];

pub fn classification_report(predictions: &[Veracity], gold: &[Veracity]) -> Result<ClassificationReport, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::Validation(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(MetricsError::Validation("no labels to score".into()));
    }
    let mut confusion: BTreeMap<Veracity, BTreeMap<Veracity, usize>> = LABELS
        .iter()
        .map(|&g| (g, LABELS.iter().map(|&p| (p, 0)).collect()))
        .collect();
    for (&p, &g) in predictions.iter().zip(gold) {
        *confusion.get_mut(&g).unwrap().get_mut(&p).unwrap() += 1;
    }
    let mut per_class = BTreeMap::new();
    for &label in &LABELS {
        let tp = confusion[&label][&label];
        let fn_ = confusion[&label].values().sum::<usize>() - tp;
        let fp = LABELS.iter().filter(|&&g| g != label).map(|g| confusion[g][&label]).sum();
        per_class.insert(label, ClassCounts { tp, fp, fn_ });
    }
    let per_class_f1: BTreeMap<_, _> = per_class.iter().map(|(&l, c)| (l, c.f1())).collect();
    let macro_f1 = per_class_f1.values().sum::<f64>() / LABELS.len() as f64;
    let pooled = per_class.values().fold(ClassCounts::default(), |acc, c| ClassCounts {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    Ok(ClassificationReport {
        macro_f1,
        micro_f1: pooled.f1(),
        per_class_f1,
        confusion,
        per_class,
        n: gold.len(),
    })
}
