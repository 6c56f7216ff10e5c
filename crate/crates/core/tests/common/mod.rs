// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations used as test oracles. None of these
//! call into the code paths they check.

#![allow(dead_code)]

use idani_core::RepresentationSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain left-to-right column sums divided by n.
pub fn naive_mean(set: &RepresentationSet) -> Vec<f64> {
    let mut m = vec![0.0; set.d()];
    for i in 0..set.n() {
        for (j, v) in set.row(i).iter().enumerate() {
            m[j] += f64::from(*v);
        }
    }
    m.iter().map(|s| s / set.n() as f64).collect()
}

/// Absolute mean difference, then selection sort: repeatedly take the
/// largest remaining score, lowest index first on ties.
pub fn brute_probeless(s: &RepresentationSet, t: &RepresentationSet) -> (Vec<f64>, Vec<usize>) {
    let ms = naive_mean(s);
    let mt = naive_mean(t);
    let scores: Vec<f64> = ms.iter().zip(&mt).map(|(a, b)| (a - b).abs()).collect();
    let mut left: Vec<usize> = (0..scores.len()).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for pos in 1..left.len() {
            if scores[left[pos]] > scores[left[best]] {
                best = pos;
            }
        }
        order.push(left.remove(best));
    }
    (scores, order)
}

pub struct Confusion {
    /// `m[gold][pred]`
    pub m: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(preds: &[usize], gold: &[i32], c: usize) -> Self {
        let mut m = vec![vec![0; c]; c];
        for (p, g) in preds.iter().zip(gold) {
            if *g >= 0 {
                m[*g as usize][*p] += 1;
            }
        }
        Self { m }
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.m.len()).map(|c| self.m[c][c]).sum();
        let total: usize = self.m.iter().flatten().sum();
        diag as f64 / total as f64
    }

    /// 2·TP / (row total + column total); 0 when both are empty.
    pub fn f1(&self, c: usize) -> f64 {
        let row: usize = self.m[c].iter().sum();
        let col: usize = self.m.iter().map(|r| r[c]).sum();
        if row + col == 0 {
            0.0
        } else {
            (2 * self.m[c][c]) as f64 / (row + col) as f64
        }
    }

    pub fn macro_f1(&self) -> f64 {
        let mut s = 0.0;
        for c in 0..self.m.len() {
            s += self.f1(c);
        }
        s / self.m.len() as f64
    }
}

/// Mean softmax cross-entropy plus `l2·‖W‖²`, written out directly from
/// probabilities rather than log-sum-exp.
pub fn reference_probe_loss(
    x: &[f64],
    y: &[usize],
    d: usize,
    classes: usize,
    w: &[f64],
    b: &[f64],
    l2: f64,
) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let logits: Vec<f64> = (0..classes)
            .map(|c| b[c] + (0..d).map(|j| w[c * d + j] * row[j]).sum::<f64>())
            .collect();
        let denom: f64 = logits.iter().map(|z| z.exp()).sum();
        total -= (logits[y[i]].exp() / denom).ln();
    }
    total / n as f64 + l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gaussian rows with per-column means `offset[j]`.
pub fn gaussian_set(
    rng: &mut ChaCha8Rng,
    domain: &str,
    n: usize,
    offset: &[f64],
    sigma: f64,
) -> RepresentationSet {
    let normal = Normal::new(0.0, sigma).unwrap();
    let d = offset.len();
    let data = (0..n * d)
        .map(|i| (offset[i % d] + normal.sample(rng)) as f32)
        .collect();
    RepresentationSet::new(domain, d, data, None, None).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, c: usize, unlabeled_rate: f64) -> Vec<i32> {
    (0..n)
        .map(|_| {
            if rng.random_bool(unlabeled_rate) {
                -1
            } else {
                rng.random_range(0..c) as i32
            }
        })
        .collect()
}
