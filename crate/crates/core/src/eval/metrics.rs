// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::head::{ClassifierHead, Metric};
use crate::error::{IdaniError, Result};
use crate::repr_store::{RepresentationSet, UNLABELED};

/// A metric value plus the classes whose F1 was undefined (no gold and no
/// predicted instances) and therefore counted as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined_classes: Vec<usize>,
}

/// Scores `preds` against `gold`, skipping rows whose gold label is `-1`.
pub fn score(preds: &[usize], gold: &[i32], metric: Metric, n_classes: usize) -> Result<Score> {
    if preds.len() != gold.len() {
        return Err(IdaniError::DimensionMismatch {
            what: "gold labels",
            expected: preds.len(),
            got: gold.len(),
        });
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    let mut correct = 0usize;
    let mut total = 0usize;
    for (&p, &g) in preds.iter().zip(gold) {
        if g == UNLABELED {
            continue;
        }
        let g = usize::try_from(g)
            .ok()
            .filter(|&g| g < n_classes)
            .ok_or_else(|| IdaniError::Validation(format!("gold label {g} out of range")))?;
        if p >= n_classes {
            return Err(IdaniError::Validation(format!("prediction {p} out of range")));
        }
        total += 1;
        if p == g {
            correct += 1;
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    if total == 0 {
        return Err(IdaniError::Validation("no labeled rows to score".into()));
    }

    let f1 = |c: usize| -> Option<f64> {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        (denom > 0).then(|| (2 * tp[c]) as f64 / denom as f64)
    };
    let mut undefined = Vec::new();
    let value = match metric {
        Metric::Accuracy => correct as f64 / total as f64,
        Metric::BinaryF1 { positive_class } => {
            if positive_class >= n_classes {
                return Err(IdaniError::Validation("positive class out of range".into()));
            }
            f1(positive_class).unwrap_or_else(|| {
                undefined.push(positive_class);
                0.0
            })
        }
        Metric::MacroF1 => {
            let mut sum = 0.0;
            for c in 0..n_classes {
                sum += f1(c).unwrap_or_else(|| {
                    undefined.push(c);
                    0.0
                });
            }
            sum / n_classes as f64
        }
    };
    Ok(Score {
        value,
        undefined_classes: undefined,
    })
}

/// Per-row correctness of the head on `set`; `None` for unlabeled rows.
pub fn correctness(head: &ClassifierHead, set: &RepresentationSet) -> Result<Vec<Option<bool>>> {
    let labels = set
        .labels()
        .ok_or_else(|| IdaniError::Validation(format!("set '{}' has no labels", set.domain())))?;
    let preds = super::head::classify(head, set)?;
    Ok(preds
        .iter()
        .zip(labels)
        .map(|(&p, &g)| (g != UNLABELED).then_some(p as i32 == g))
        .collect())
}
