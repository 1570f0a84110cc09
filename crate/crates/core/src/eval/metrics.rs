use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VeracityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot score an empty set of predictions")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub f1_true: f64,
    pub f1_false: f64,
    pub macro_f1: f64,
}

/// F1 for one class taken as positive: 2TP / (2TP + FP + FN), or 0 when
/// the class never occurs in gold or predictions.
pub fn class_f1(pairs: &[(VeracityLabel, VeracityLabel)], positive: VeracityLabel) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for &(gold, pred) in pairs {
        match (gold == positive, pred == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Per-class F1 and their unweighted mean over `(gold, predicted)` pairs.
pub fn macro_f1(pairs: &[(VeracityLabel, VeracityLabel)]) -> Result<F1Scores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let f1_true = class_f1(pairs, VeracityLabel::True);
    let f1_false = class_f1(pairs, VeracityLabel::False);
    Ok(F1Scores {
        f1_true,
        f1_false,
        macro_f1: (f1_true + f1_false) / 2.0,
    })
}
