// SPDX-License-Identifier: MIT OR Apache-2.0

//! Grid search over the number of modified neurons `k` and the intervention
//! magnitude `beta`, for one or more ranking methods.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head::{classify, ClassifierHead};
use super::metrics::{score, Score};
use crate::error::{IdaniError, Result};
use crate::intervention::{intervene, make_plan};
use crate::ranking::{
    linear_rank, probeless_rank, train_domain_probe, NeuronRanking, ProbeHyper, RankMethod,
};
use crate::repr_store::{compute_mean, MeanVector, RepresentationSet};

/// The customary default cell, `beta = 8, k = 50`.
pub const DEFAULT_BETA: f64 = 8.0;
pub const DEFAULT_K: usize = 50;

/// `{0,1,2,5,10,20,30,50,75,100,150,200,300,500,d}` restricted to `≤ d`.
pub fn default_k_grid(d: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [0, 1, 2, 5, 10, 20, 30, 50, 75, 100, 150, 200, 300, 500]
        .into_iter()
        .filter(|&k| k <= d)
        .collect();
    if grid.last() != Some(&d) {
        grid.push(d);
    }
    grid
}

/// Integers `1..=10`.
pub fn default_beta_grid() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<RankMethod>,
    pub k_grid: Vec<usize>,
    pub beta_grid: Vec<f64>,
    /// Seeds the linear probe's initialization.
    pub seed: u64,
    pub probe: ProbeHyper,
    /// Permit `beta` outside `[1, 10]`.
    pub allow_out_of_range: bool,
}

impl SweepConfig {
    pub fn with_defaults(d: usize, methods: Vec<RankMethod>, seed: u64) -> Self {
        Self {
            methods,
            k_grid: default_k_grid(d),
            beta_grid: default_beta_grid(),
            seed,
            probe: ProbeHyper::default(),
            allow_out_of_range: false,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.methods.is_empty() || self.k_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(IdaniError::InvalidArgument(
                "methods, k grid and beta grid must be non-empty".into(),
            ));
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| k > d) {
            return Err(IdaniError::InvalidArgument(format!(
                "k={k} outside [0, d={d}]"
            )));
        }
        for &b in &self.beta_grid {
            if !(b > 0.0 && b.is_finite()) {
                return Err(IdaniError::InvalidArgument(format!("beta={b} must be positive")));
            }
            if !self.allow_out_of_range && !(1.0..=10.0).contains(&b) {
                return Err(IdaniError::InvalidArgument(format!(
                    "beta={b} outside [1, 10]; pass the out-of-range override to allow it"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: RankMethod,
    pub k: usize,
    pub beta: f64,
    pub score: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: RankMethod,
    /// `k` of the default cell, `min(50, d)`.
    pub default_k: usize,
    /// Set when `d < 50` forced the default `k` down to `d`.
    pub default_k_clamped: bool,
    /// Delta at the default cell, or `None` if the grid does not contain it.
    pub delta_default: Option<f64>,
    pub delta_oracle: f64,
    pub oracle_k: usize,
    pub oracle_beta: f64,
    pub oracle_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub metric: String,
    pub d: usize,
    pub source_domain: String,
    pub target_domain: String,
    /// Score at `k = 0`, i.e. without intervention.
    pub init_score: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_undefined_classes: Vec<usize>,
    /// Cells in method, then `k`, then `beta` order.
    pub grid: Vec<SweepCell>,
    pub methods: Vec<MethodSummary>,
}

impl SweepReport {
    pub fn summary(&self, method: RankMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Oracle cell across all methods; ties keep the earlier method.
    pub fn best(&self) -> Option<&MethodSummary> {
        self.methods.iter().fold(None, |best: Option<&MethodSummary>, m| match best {
            Some(b) if b.delta_oracle >= m.delta_oracle => Some(b),
            _ => Some(m),
        })
    }

    /// `k,beta,method,score,delta` with a header row and LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,beta,method,score,delta\n");
        for c in &self.grid {
            let _ = writeln!(out, "{},{},{},{},{}", c.k, c.beta, c.method, c.score, c.delta);
        }
        out
    }

    /// `(method, k, beta)` of every cell, used to check that seeds are comparable.
    pub fn grid_key(&self) -> Vec<(RankMethod, usize, u64)> {
        self.grid.iter().map(|c| (c.method, c.k, c.beta.to_bits())).collect()
    }
}

/// Ranking for `method`, trained on the given sets when it needs a probe.
pub fn rank_with(
    method: RankMethod,
    source: &RepresentationSet,
    target: &RepresentationSet,
    mean_s: &MeanVector,
    mean_t: &MeanVector,
    probe: ProbeHyper,
    seed: u64,
) -> Result<NeuronRanking> {
    match method {
        RankMethod::Probeless => probeless_rank(mean_s, mean_t),
        RankMethod::Linear => linear_rank(&train_domain_probe(source, target, probe, seed)?),
    }
}

/// Evaluates every `(method, k, beta)` cell on the labeled target set.
///
/// The ranking and the means use representations only; gold labels are read
/// solely for scoring.
pub fn run_sweep(
    source: &RepresentationSet,
    target_labeled: &RepresentationSet,
    head: &ClassifierHead,
    config: &SweepConfig,
) -> Result<SweepReport> {
    let d = source.d();
    if target_labeled.d() != d {
        return Err(IdaniError::DimensionMismatch {
            what: "target set",
            expected: d,
            got: target_labeled.d(),
        });
    }
    if head.d() != d {
        return Err(IdaniError::DimensionMismatch {
            what: "classifier head",
            expected: d,
            got: head.d(),
        });
    }
    let gold = target_labeled.labels().ok_or_else(|| {
        IdaniError::Validation(format!(
            "target set '{}' has no gold labels",
            target_labeled.domain()
        ))
    })?;
    target_labeled.check_labels(head.n_classes())?;
    config.validate(d)?;

    let metric = head.metric();
    let c = head.n_classes();
    let evaluate = |set: &RepresentationSet| -> Result<Score> {
        score(&classify(head, set)?, gold, metric, c)
    };
    let init = evaluate(target_labeled)?;

    let mean_s = compute_mean(source);
    let mean_t = compute_mean(target_labeled);
    let rankings = config
        .methods
        .iter()
        .map(|&m| rank_with(m, source, target_labeled, &mean_s, &mean_t, config.probe, config.seed))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(usize, usize, f64)> = (0..rankings.len())
        .flat_map(|mi| {
            config
                .k_grid
                .iter()
                .flat_map(move |&k| config.beta_grid.iter().map(move |&b| (mi, k, b)))
        })
        .collect();
    let grid = cells
        .par_iter()
        .map(|&(mi, k, beta)| {
            let plan = make_plan(&rankings[mi], k, beta, &mean_s, &mean_t)?;
            let s = evaluate(&intervene(target_labeled, &plan)?)?;
            Ok(SweepCell {
                method: rankings[mi].method,
                k,
                beta,
                score: s.value,
                delta: s.value - init.value,
                undefined_classes: s.undefined_classes,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let default_k = DEFAULT_K.min(d);
    let methods = config
        .methods
        .iter()
        .map(|&method| {
            let mut oracle: Option<&SweepCell> = None;
            let mut delta_default = None;
            for cell in grid.iter().filter(|c| c.method == method) {
                if oracle.is_none_or(|o| cell.delta > o.delta) {
                    oracle = Some(cell);
                }
                if cell.k == default_k && cell.beta == DEFAULT_BETA {
                    delta_default = Some(cell.delta);
                }
            }
            let oracle = oracle.expect("non-empty grid");
            MethodSummary {
                method,
                default_k,
                default_k_clamped: default_k < DEFAULT_K,
                delta_default,
                delta_oracle: oracle.delta,
                oracle_k: oracle.k,
                oracle_beta: oracle.beta,
                oracle_score: oracle.score,
            }
        })
        .collect();

    Ok(SweepReport {
        seed: config.seed,
        metric: metric.name().to_string(),
        d,
        source_domain: source.domain().to_string(),
        target_domain: target_labeled.domain().to_string(),
        init_score: init.value,
        init_undefined_classes: init.undefined_classes,
        grid,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::head::Metric;

    #[test]
    fn default_grids() {
        assert_eq!(
            default_k_grid(768),
            vec![0, 1, 2, 5, 10, 20, 30, 50, 75, 100, 150, 200, 300, 500, 768]
        );
        assert_eq!(default_k_grid(30), vec![0, 1, 2, 5, 10, 20, 30]);
        assert_eq!(default_k_grid(40), vec![0, 1, 2, 5, 10, 20, 30, 40]);
        assert_eq!(default_beta_grid().len(), 10);
    }

    fn tiny() -> (RepresentationSet, RepresentationSet, ClassifierHead) {
        let s = RepresentationSet::from_rows(
            "s",
            &[vec![1.0, 0.0, 0.5], vec![-1.0, 0.0, 0.4], vec![1.0, 0.1, 0.6]],
        )
        .unwrap();
        let t = RepresentationSet::from_rows(
            "t",
            &[vec![1.0, 2.0, 0.5], vec![-1.0, 2.0, 0.4], vec![0.5, 2.1, 0.6]],
        )
        .unwrap()
        .with_labels(vec![0, 1, 0])
        .unwrap();
        let head = ClassifierHead::new(
            vec![vec![1.0, -0.5, 0.0], vec![-1.0, 0.5, 0.0]],
            vec![0.0, 0.0],
            vec!["a".into(), "b".into()],
            Metric::Accuracy,
        )
        .unwrap();
        (s, t, head)
    }

    #[test]
    fn k_zero_only_grid() {
        let (s, t, head) = tiny();
        let cfg = SweepConfig {
            k_grid: vec![0],
            ..SweepConfig::with_defaults(3, vec![RankMethod::Probeless], 0)
        };
        let r = run_sweep(&s, &t, &head, &cfg).unwrap();
        assert!(r.grid.iter().all(|c| c.delta == 0.0 && c.score == r.init_score));
        let m = r.summary(RankMethod::Probeless).unwrap();
        assert_eq!(m.delta_oracle, 0.0);
        assert_eq!(m.delta_default, None);
    }

    #[test]
    fn clamps_default_k_on_small_d() {
        let (s, t, head) = tiny();
        let cfg = SweepConfig::with_defaults(3, vec![RankMethod::Probeless], 0);
        let r = run_sweep(&s, &t, &head, &cfg).unwrap();
        let m = r.summary(RankMethod::Probeless).unwrap();
        assert_eq!(m.default_k, 3);
        assert!(m.default_k_clamped);
        assert!(m.delta_default.is_some());
        assert!(m.delta_oracle >= m.delta_default.unwrap());
        // initial accuracy 2/3; shifting neuron 1 back toward the source at beta=1 fixes row 2
        assert!(m.delta_oracle > 0.0);
    }

    #[test]
    fn rejects_missing_labels_and_bad_grids() {
        let (s, t, head) = tiny();
        let cfg = SweepConfig::with_defaults(3, vec![RankMethod::Probeless], 0);
        assert!(run_sweep(&s, &s, &head, &cfg).is_err());

        let bad_k = SweepConfig { k_grid: vec![4], ..cfg.clone() };
        assert!(run_sweep(&s, &t, &head, &bad_k).is_err());

        let bad_beta = SweepConfig { beta_grid: vec![12.0], ..cfg.clone() };
        assert!(run_sweep(&s, &t, &head, &bad_beta).is_err());
        let allowed = SweepConfig { allow_out_of_range: true, ..bad_beta };
        assert!(run_sweep(&s, &t, &head, &allowed).is_ok());
    }

    #[test]
    fn csv_has_header_and_one_row_per_cell() {
        let (s, t, head) = tiny();
        let cfg = SweepConfig {
            k_grid: vec![0, 2],
            beta_grid: vec![1.0, 8.0],
            ..SweepConfig::with_defaults(3, vec![RankMethod::Probeless], 0)
        };
        let r = run_sweep(&s, &t, &head, &cfg).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,beta,method,score,delta");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,1,probeless,"));
        assert!(!csv.contains('\r'));
    }
}
