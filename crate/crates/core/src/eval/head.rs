// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IdaniError, Result};
use crate::repr_store::RepresentationSet;

/// Task metric used to score a head's predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    MacroF1,
    BinaryF1 { positive_class: usize },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
            Metric::BinaryF1 { .. } => "binary_f1",
        }
    }
}

/// A frozen linear task classifier: `argmax_c (W h + b)_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    class_names: Vec<String>,
    metric: Metric,
}

/// On-disk head layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadJson {
    pub d: usize,
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<usize>,
}

impl ClassifierHead {
    pub fn new(
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        class_names: Vec<String>,
        metric: Metric,
    ) -> Result<Self> {
        let c = weights.len();
        if c < 2 {
            return Err(IdaniError::Validation(format!("head needs at least 2 classes, got {c}")));
        }
        let d = weights[0].len();
        if d == 0 || weights.iter().any(|w| w.len() != d) {
            return Err(IdaniError::Validation("head weight rows are empty or ragged".into()));
        }
        if bias.len() != c || class_names.len() != c {
            return Err(IdaniError::Validation(format!(
                "head has {c} weight rows but {} biases and {} class names",
                bias.len(),
                class_names.len()
            )));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(IdaniError::Validation("head parameters must be finite".into()));
        }
        if let Metric::BinaryF1 { positive_class } = metric {
            if positive_class >= c {
                return Err(IdaniError::Validation(format!(
                    "positive_class {positive_class} out of range for {c} classes"
                )));
            }
        }
        Ok(Self {
            weights,
            bias,
            class_names,
            metric,
        })
    }

    pub fn d(&self) -> usize {
        self.weights[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn predict(&self, row: &[f32]) -> usize {
        let mut best = 0;
        let mut best_z = f64::NEG_INFINITY;
        for (c, (w, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let z = b + w.iter().zip(row).map(|(a, &x)| a * f64::from(x)).sum::<f64>();
            // strict: ties keep the lowest class id
            if z > best_z {
                best = c;
                best_z = z;
            }
        }
        best
    }

    pub fn to_json(&self) -> HeadJson {
        HeadJson {
            d: self.d(),
            classes: self.class_names.clone(),
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            metric: self.metric.name().to_string(),
            positive_class: match self.metric {
                Metric::BinaryF1 { positive_class } => Some(positive_class),
                _ => None,
            },
        }
    }

    pub fn from_json(json: HeadJson) -> Result<Self> {
        let metric = match json.metric.as_str() {
            "accuracy" => Metric::Accuracy,
            "macro_f1" => Metric::MacroF1,
            "binary_f1" => Metric::BinaryF1 {
                positive_class: json.positive_class.ok_or_else(|| {
                    IdaniError::Validation("binary_f1 head requires positive_class".into())
                })?,
            },
            other => {
                return Err(IdaniError::Validation(format!("unknown metric '{other}'")));
            }
        };
        let head = Self::new(json.weights, json.bias, json.classes, metric)?;
        if head.d() != json.d {
            return Err(IdaniError::DimensionMismatch {
                what: "head weight rows",
                expected: json.d,
                got: head.d(),
            });
        }
        Ok(head)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IdaniError::io(path, e))?;
        Self::from_json(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_json())?;
        fs::write(path, text + "\n").map_err(|e| IdaniError::io(path, e))
    }
}

/// Predicted class id for every row of `set`.
pub fn classify(head: &ClassifierHead, set: &RepresentationSet) -> Result<Vec<usize>> {
    if head.d() != set.d() {
        return Err(IdaniError::DimensionMismatch {
            what: "representation set",
            expected: head.d(),
            got: set.d(),
        });
    }
    Ok(set.rows().map(|r| head.predict(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(c: usize) -> Vec<String> {
        (0..c).map(|i| format!("c{i}")).collect()
    }

    fn rows(r: &[Vec<f64>]) -> RepresentationSet {
        RepresentationSet::from_rows("t", r).unwrap()
    }

    #[test]
    fn argmax_example() {
        let head = ClassifierHead::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            names(2),
            Metric::Accuracy,
        )
        .unwrap();
        assert_eq!(classify(&head, &rows(&[vec![2.0, 1.0]])).unwrap(), vec![0]);
        assert_eq!(classify(&head, &rows(&[vec![1.0, 2.0]])).unwrap(), vec![1]);
        // exact tie goes to class 0
        assert_eq!(classify(&head, &rows(&[vec![1.5, 1.5]])).unwrap(), vec![0]);
    }

    #[test]
    fn bias_dominated() {
        let head = ClassifierHead::new(
            vec![vec![0.0; 3], vec![0.0; 3]],
            vec![5.0, 0.0],
            names(2),
            Metric::Accuracy,
        )
        .unwrap();
        let preds = classify(&head, &rows(&[vec![9.0, -4.0, 1.0], vec![0.0; 3]])).unwrap();
        assert_eq!(preds, vec![0, 0]);
    }

    #[test]
    fn dimension_mismatch() {
        let head =
            ClassifierHead::new(vec![vec![1.0], vec![0.0]], vec![0.0; 2], names(2), Metric::Accuracy)
                .unwrap();
        assert!(classify(&head, &rows(&[vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let head = ClassifierHead::new(
            vec![vec![0.5, -1.0], vec![2.0, 0.25]],
            vec![0.1, -0.1],
            vec!["neg".into(), "pos".into()],
            Metric::BinaryF1 { positive_class: 1 },
        )
        .unwrap();
        let text = serde_json::to_string(&head.to_json()).unwrap();
        let back = ClassifierHead::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, head);

        let mut bad = head.to_json();
        bad.positive_class = None;
        assert!(ClassifierHead::from_json(bad).is_err());
        let mut bad = head.to_json();
        bad.d = 3;
        assert!(ClassifierHead::from_json(bad).is_err());
        assert!(ClassifierHead::new(vec![vec![1.0]], vec![0.0], names(1), Metric::Accuracy).is_err());
    }
}
