// SPDX-License-Identifier: MIT OR Apache-2.0

//! Counterfactual interventions on target representations.
//!
//! For each of the `k` highest-ranked neurons `n = order[j]`, a target
//! representation is moved toward the source domain:
//!
//! ```text
//! out[n] = h[n] + alpha[j] * (mean_s[n] - mean_t[n])
//! ```
//!
//! `alpha` is indexed by rank position and decays logarithmically from
//! `beta` at the top of the ranking to `0` at the bottom. All other neurons
//! are copied through untouched.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IdaniError, Result};
use crate::ranking::{NeuronRanking, RankMethod};
use crate::repr_store::{MeanVector, RepresentationSet};

/// Coefficients `alpha[j] = beta · (1 − ln(1 + j) / ln d)` for rank positions
/// `j = 0..d`.
pub fn build_alpha(d: usize, beta: f64) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(IdaniError::InvalidArgument(format!(
            "alpha needs d ≥ 2, got {d}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(IdaniError::InvalidArgument(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let log_d = (d as f64).ln();
    let mut alpha: Vec<f64> = (0..d)
        .map(|j| beta * (1.0 - ((1 + j) as f64).ln() / log_d))
        .collect();
    // ln(d)/ln(d) can round to something other than 1.
    alpha[d - 1] = 0.0;
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub ranking: NeuronRanking,
    pub k: usize,
    pub beta: f64,
    /// Indexed by rank position.
    pub alpha: Vec<f64>,
    /// `mean_s − mean_t`, indexed by neuron.
    pub delta: Vec<f64>,
    /// Domain names of the means, used to tag the counterfactual set.
    pub source_domain: String,
    pub target_domain: String,
}

/// Audit form of a plan: `{method, k, beta, order, alpha, delta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub method: RankMethod,
    pub k: usize,
    pub beta: f64,
    pub order: Vec<usize>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
}

impl InterventionPlan {
    pub fn d(&self) -> usize {
        self.delta.len()
    }

    pub fn record(&self) -> PlanRecord {
        PlanRecord {
            method: self.ranking.method,
            k: self.k,
            beta: self.beta,
            order: self.ranking.order.clone(),
            alpha: self.alpha.clone(),
            delta: self.delta.clone(),
        }
    }

    /// `(neuron, shift)` for every modified neuron, in rank order.
    pub fn shifts(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.ranking.order[..self.k]
            .iter()
            .enumerate()
            .map(|(j, &n)| (n, self.alpha[j] * self.delta[n]))
    }
}

pub fn make_plan(
    ranking: &NeuronRanking,
    k: usize,
    beta: f64,
    mean_s: &MeanVector,
    mean_t: &MeanVector,
) -> Result<InterventionPlan> {
    let d = ranking.d;
    for (what, got) in [("source mean", mean_s.d), ("target mean", mean_t.d)] {
        if got != d {
            return Err(IdaniError::DimensionMismatch { what, expected: d, got });
        }
    }
    if k > d {
        return Err(IdaniError::InvalidArgument(format!("k={k} exceeds d={d}")));
    }
    let alpha = build_alpha(d, beta)?;
    let delta = mean_s
        .values
        .iter()
        .zip(&mean_t.values)
        .map(|(s, t)| s - t)
        .collect();
    Ok(InterventionPlan {
        ranking: ranking.clone(),
        k,
        beta,
        alpha,
        delta,
        source_domain: mean_s.domain.clone(),
        target_domain: mean_t.domain.clone(),
    })
}

/// Applies the plan to every row, returning a new set tagged
/// `"{target}→{source}"`. Labels and tokens are carried through.
pub fn intervene(set: &RepresentationSet, plan: &InterventionPlan) -> Result<RepresentationSet> {
    if set.d() != plan.d() {
        return Err(IdaniError::DimensionMismatch {
            what: "representation set",
            expected: plan.d(),
            got: set.d(),
        });
    }
    let domain = format!("{}→{}", plan.target_domain, plan.source_domain);
    let (_, d, mut data, labels, tokens) = set.clone().into_parts();
    if plan.k > 0 {
        let shifts: Vec<(usize, f64)> = plan.shifts().collect();
        data.par_chunks_mut(d).for_each(|row| {
            for &(n, shift) in &shifts {
                row[n] = (f64::from(row[n]) + shift) as f32;
            }
        });
    }
    RepresentationSet::new(domain, d, data, labels, tokens)
}
