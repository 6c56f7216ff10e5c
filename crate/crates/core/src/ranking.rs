// SPDX-License-Identifier: MIT OR Apache-2.0

//! Neuron rankings by domain informativeness.
//!
//! Two rankers are provided:
//!
//! - **Probeless**: score each neuron by the absolute difference between the
//!   source and target means.
//! - **Linear**: train an elastic-net regularized softmax probe to predict
//!   the domain, then score each neuron by the summed absolute weight it
//!   receives across classes.
//!
//! Both produce a [`NeuronRanking`] whose `order` lists neurons from most to
//! least informative. Ties are always broken by ascending neuron index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IdaniError, Result};
use crate::repr_store::{MeanVector, RepresentationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Probeless,
    Linear,
}

impl RankMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RankMethod::Probeless => "probeless",
            RankMethod::Linear => "linear",
        }
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankMethod {
    type Err = IdaniError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probeless" => Ok(RankMethod::Probeless),
            "linear" => Ok(RankMethod::Linear),
            other => Err(IdaniError::InvalidArgument(format!(
                "unknown ranking method '{other}'"
            ))),
        }
    }
}

/// A permutation of neuron indices, most domain-informative first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRanking {
    pub method: RankMethod,
    pub d: usize,
    pub order: Vec<usize>,
    /// Per-neuron score, indexed by neuron (not by rank).
    pub scores: Vec<f64>,
}

impl NeuronRanking {
    /// Sorts neurons by descending score, ascending index on ties.
    pub fn from_scores(method: RankMethod, scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(IdaniError::Validation("cannot rank zero neurons".into()));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(IdaniError::Validation(
                "ranking scores must be finite and non-negative".into(),
            ));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(Self {
            method,
            d: scores.len(),
            order,
            scores,
        })
    }

    /// Checks the permutation and descending-score invariants, e.g. after
    /// deserializing a ranking written by another tool.
    pub fn validate(&self) -> Result<()> {
        if self.order.len() != self.d || self.scores.len() != self.d {
            return Err(IdaniError::Validation(format!(
                "ranking lengths (order {}, scores {}) disagree with d={}",
                self.order.len(),
                self.scores.len(),
                self.d
            )));
        }
        let mut seen = vec![false; self.d];
        for &i in &self.order {
            if i >= self.d || std::mem::replace(&mut seen[i], true) {
                return Err(IdaniError::Validation(
                    "ranking order is not a permutation".into(),
                ));
            }
        }
        if self
            .order
            .windows(2)
            .any(|w| self.scores[w[0]] < self.scores[w[1]])
        {
            return Err(IdaniError::Validation(
                "ranking scores are not descending along the order".into(),
            ));
        }
        Ok(())
    }

    /// Rank position of every neuron (inverse permutation of `order`).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.d];
        for (j, &n) in self.order.iter().enumerate() {
            pos[n] = j;
        }
        pos
    }
}

/// Scores each neuron by `|mean_s[i] - mean_t[i]|`.
pub fn probeless_rank(mean_s: &MeanVector, mean_t: &MeanVector) -> Result<NeuronRanking> {
    if mean_s.d != mean_t.d {
        return Err(IdaniError::DimensionMismatch {
            what: "target mean",
            expected: mean_s.d,
            got: mean_t.d,
        });
    }
    let scores = mean_s
        .values
        .iter()
        .zip(&mean_t.values)
        .map(|(s, t)| (s - t).abs())
        .collect();
    NeuronRanking::from_scores(RankMethod::Probeless, scores)
}

/// The first `k` neurons of the ranking.
pub fn top_k(ranking: &NeuronRanking, k: usize) -> Result<&[usize]> {
    if k > ranking.d {
        return Err(IdaniError::InvalidArgument(format!(
            "k={k} exceeds d={}",
            ranking.d
        )));
    }
    Ok(&ranking.order[..k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyper {
    pub l1: f64,
    pub l2: f64,
    /// Initial step size; the optimizer halves it whenever a step fails the
    /// sufficient-decrease test.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        Self {
            l1: 1e-4,
            l2: 1e-4,
            learning_rate: 0.1,
            max_epochs: 500,
            tol: 1e-6,
        }
    }
}

impl ProbeHyper {
    fn validate(&self) -> Result<()> {
        let ok = self.l1 >= 0.0
            && self.l2 >= 0.0
            && self.learning_rate > 0.0
            && self.tol > 0.0
            && self.l1.is_finite()
            && self.l2.is_finite()
            && self.learning_rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(IdaniError::InvalidArgument(format!(
                "invalid probe hyperparameters {self:?}"
            )))
        }
    }
}

/// Design matrix and class targets for a softmax probe.
///
/// Parameters are laid out as a row-major `classes × d` weight matrix plus a
/// bias per class.
#[derive(Debug, Clone)]
pub struct ProbeData {
    n: usize,
    d: usize,
    classes: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl ProbeData {
    /// Source rows get class 0, target rows class 1.
    pub fn from_domains(h_s: &RepresentationSet, h_t: &RepresentationSet) -> Result<Self> {
        if h_s.d() != h_t.d() {
            return Err(IdaniError::DimensionMismatch {
                what: "target representations",
                expected: h_s.d(),
                got: h_t.d(),
            });
        }
        let x = h_s
            .data()
            .iter()
            .chain(h_t.data())
            .map(|&v| f64::from(v))
            .collect();
        let y = std::iter::repeat_n(0, h_s.n())
            .chain(std::iter::repeat_n(1, h_t.n()))
            .collect();
        Ok(Self {
            n: h_s.n() + h_t.n(),
            d: h_s.d(),
            classes: 2,
            x,
            y,
        })
    }

    pub fn new(d: usize, classes: usize, x: Vec<f64>, y: Vec<usize>) -> Result<Self> {
        if d == 0 || classes < 2 || x.len() != y.len() * d || y.is_empty() {
            return Err(IdaniError::InvalidArgument(
                "probe data needs d ≥ 1, ≥ 2 classes and one target per row".into(),
            ));
        }
        if y.iter().any(|&c| c >= classes) {
            return Err(IdaniError::InvalidArgument("probe target out of range".into()));
        }
        Ok(Self {
            n: y.len(),
            d,
            classes,
            x,
            y,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Copy with every column shifted to zero mean, plus the column means.
    fn centered(&self) -> (Self, Vec<f64>) {
        let mut mu = vec![0.0; self.d];
        for row in self.x.chunks_exact(self.d) {
            for (m, v) in mu.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mu {
            *m /= self.n as f64;
        }
        let x = self
            .x
            .chunks_exact(self.d)
            .flat_map(|row| row.iter().zip(&mu).map(|(v, m)| v - m))
            .collect();
        (Self { x, ..self.clone() }, mu)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, row: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = &weights[c * self.d..(c + 1) * self.d];
            *o = bias[c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Mean cross-entropy plus `l2·‖W‖²`, without the gradient.
    pub fn smooth_loss(&self, weights: &[f64], bias: &[f64], l2: f64) -> f64 {
        let mut z = vec![0.0; self.classes];
        let mut ce = 0.0;
        for (row, &y) in self.x.chunks_exact(self.d).zip(&self.y) {
            self.logits(row, weights, bias, &mut z);
            ce += log_sum_exp(&z) - z[y];
        }
        ce / self.n as f64 + l2 * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Smooth loss together with its gradient `(dW, db)`.
    pub fn smooth_loss_grad(
        &self,
        weights: &[f64],
        bias: &[f64],
        l2: f64,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let mut gw = vec![0.0; weights.len()];
        let mut gb = vec![0.0; self.classes];
        let mut z = vec![0.0; self.classes];
        let mut ce = 0.0;
        for (row, &y) in self.x.chunks_exact(self.d).zip(&self.y) {
            self.logits(row, weights, bias, &mut z);
            let lse = log_sum_exp(&z);
            ce += lse - z[y];
            for c in 0..self.classes {
                let r = (z[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                gb[c] += r;
                for (g, x) in gw[c * self.d..(c + 1) * self.d].iter_mut().zip(row) {
                    *g += r * x;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        for (g, w) in gw.iter_mut().zip(weights) {
            *g = *g * inv_n + 2.0 * l2 * w;
        }
        for g in &mut gb {
            *g *= inv_n;
        }
        let loss = ce * inv_n + l2 * weights.iter().map(|w| w * w).sum::<f64>();
        (loss, gw, gb)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// A trained domain classifier (class 0 = source, 1 = target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainProbe {
    /// `classes × d`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub hyper: ProbeHyper,
    /// Full objective (smooth part plus `l1·‖W‖₁`) after each epoch, starting
    /// with the value at initialization.
    pub training_loss_trace: Vec<f64>,
}

impl DomainProbe {
    pub fn d(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn predict(&self, row: &[f32]) -> usize {
        let mut best = 0;
        let mut best_z = f64::NEG_INFINITY;
        for (c, (w, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let z = b + w.iter().zip(row).map(|(a, &x)| a * f64::from(x)).sum::<f64>();
            if z > best_z {
                best = c;
                best_z = z;
            }
        }
        best
    }

    /// Fraction of rows whose predicted domain matches (`h_s` → 0, `h_t` → 1).
    pub fn accuracy(&self, h_s: &RepresentationSet, h_t: &RepresentationSet) -> f64 {
        let hits = h_s.rows().filter(|r| self.predict(r) == 0).count()
            + h_t.rows().filter(|r| self.predict(r) == 1).count();
        hits as f64 / (h_s.n() + h_t.n()) as f64
    }
}

/// Trains a softmax domain probe with elastic-net regularization.
///
/// Optimization is full-batch proximal gradient descent: a gradient step on
/// cross-entropy plus the `l2` term, followed by soft-thresholding for `l1`.
/// The step starts at `learning_rate` and is halved until the standard
/// sufficient-decrease condition holds, so the objective never increases.
/// Weights start from `N(0, 0.01²)` draws seeded by `seed`; biases start at 0.
///
/// Features are not scaled. They are mean-centered during optimization and
/// the bias is mapped back afterwards, which leaves the raw-space model and
/// its penalties unchanged; without it, neurons with a large mean stand in
/// for the slowly converging intercept and soak up weight.
pub fn train_domain_probe(
    h_s: &RepresentationSet,
    h_t: &RepresentationSet,
    hyper: ProbeHyper,
    seed: u64,
) -> Result<DomainProbe> {
    hyper.validate()?;
    let (data, mu) = ProbeData::from_domains(h_s, h_t)?.centered();
    let (weights, mut bias, trace) = fit_probe(&data, hyper, seed)?;
    let d = data.d;
    for (b, w) in bias.iter_mut().zip(weights.chunks_exact(d)) {
        *b -= w.iter().zip(&mu).map(|(w, m)| w * m).sum::<f64>();
    }
    Ok(DomainProbe {
        weights: weights.chunks_exact(d).map(<[f64]>::to_vec).collect(),
        bias,
        hyper,
        training_loss_trace: trace,
    })
}

const MIN_STEP: f64 = 1e-12;

fn fit_probe(data: &ProbeData, hyper: ProbeHyper, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w: Vec<f64> = (0..data.classes * data.d).map(|_| init.sample(&mut rng)).collect();
    let mut b = vec![0.0; data.classes];
    let l1_norm = |w: &[f64]| w.iter().map(|v| v.abs()).sum::<f64>();

    let mut step = hyper.learning_rate;
    let (mut f, mut gw, mut gb) = data.smooth_loss_grad(&w, &b, hyper.l2);
    let mut objective = f + hyper.l1 * l1_norm(&w);
    if !objective.is_finite() {
        return Err(IdaniError::Divergence { epoch: 0, loss: objective });
    }
    let mut trace = vec![objective];

    for epoch in 1..=hyper.max_epochs {
        let (next_w, next_b, next_f) = loop {
            let cand_w: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(wi, gi)| soft_threshold(wi - step * gi, step * hyper.l1))
                .collect();
            let cand_b: Vec<f64> = b.iter().zip(&gb).map(|(bi, gi)| bi - step * gi).collect();
            let cand_f = data.smooth_loss(&cand_w, &cand_b, hyper.l2);
            if !cand_f.is_finite() && step <= MIN_STEP {
                return Err(IdaniError::Divergence { epoch, loss: cand_f });
            }
            // f(z) ≤ f(x) + ⟨∇f(x), z − x⟩ + ‖z − x‖² / 2t
            let (mut lin, mut sq) = (0.0, 0.0);
            for ((c, x), g) in cand_w.iter().zip(&w).zip(&gw).chain(cand_b.iter().zip(&b).zip(&gb)) {
                let diff = c - x;
                lin += g * diff;
                sq += diff * diff;
            }
            if cand_f.is_finite() && cand_f <= f + lin + sq / (2.0 * step) {
                break (cand_w, cand_b, cand_f);
            }
            if step <= MIN_STEP {
                // No representable descent step left: we are at a stationary point.
                break (w.clone(), b.clone(), f);
            }
            step *= 0.5;
        };
        let next_objective = next_f + hyper.l1 * l1_norm(&next_w);
        if !next_objective.is_finite() {
            return Err(IdaniError::Divergence { epoch, loss: next_objective });
        }
        let change = (objective - next_objective).abs();
        w = next_w;
        b = next_b;
        objective = next_objective;
        trace.push(objective);
        if change < hyper.tol {
            break;
        }
        let (nf, ngw, ngb) = data.smooth_loss_grad(&w, &b, hyper.l2);
        f = nf;
        gw = ngw;
        gb = ngb;
        debug_assert!((f - next_f).abs() <= 1e-9 * f.abs().max(1.0));
    }
    Ok((w, b, trace))
}

/// Scores each neuron by the sum over classes of its absolute probe weight.
pub fn linear_rank(probe: &DomainProbe) -> Result<NeuronRanking> {
    let d = probe.d();
    if d == 0 || probe.weights.iter().any(|w| w.len() != d) {
        return Err(IdaniError::Validation("probe weights are ragged or empty".into()));
    }
    let scores = (0..d)
        .map(|i| probe.weights.iter().map(|w| w[i].abs()).sum())
        .collect();
    NeuronRanking::from_scores(RankMethod::Linear, scores)
}
