use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score at or above which a sentence counts as understood.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// `true` = understood; `false` = flag for simplification.
pub fn classify_threshold(scores: &[f64]) -> Vec<bool> {
    scores.iter().map(|&s| s >= DECISION_THRESHOLD).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Support-weighted classification metrics. Class index 0 is "not
/// understood", 1 is "understood".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighted_recall: f64,
    pub weighted_precision: f64,
    pub weighted_f1: f64,
    /// `confusion[true_class][predicted_class]`.
    pub confusion: [[usize; 2]; 2],
    pub per_class: [ClassMetrics; 2],
    pub selected_feature_indices: Vec<usize>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn weighted_metrics(y_true: &[bool], y_pred: &[bool]) -> Result<EvalReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[usize::from(t)][usize::from(p)] += 1;
    }
    let total = y_true.len() as f64;
    let per_class = [0, 1].map(|c| {
        let tp = confusion[c][c];
        let support = confusion[c][0] + confusion[c][1];
        let predicted = confusion[0][c] + confusion[1][c];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    });
    let weighted = |get: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 / total * get(m))
            .sum::<f64>()
    };
    Ok(EvalReport {
        weighted_recall: weighted(|m| m.recall),
        weighted_precision: weighted(|m| m.precision),
        weighted_f1: weighted(|m| m.f1),
        confusion,
        per_class,
        selected_feature_indices: Vec::new(),
    })
}
