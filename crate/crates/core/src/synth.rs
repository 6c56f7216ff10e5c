// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic source/target representations with planted domain neurons.
//!
//! Every row starts as i.i.d. `N(0, σ²)` noise. A uniformly drawn task class
//! `y` adds `τ` to the task neurons assigned to `y` (task neuron `t` belongs
//! to class `t mod C`). Target rows additionally get `+δ` on every planted
//! domain neuron. The two neuron sets are disjoint and their positions are
//! drawn at random from the seed.
//!
//! The matching head is the analytic linear classifier for this model: class
//! `c` scores `τ · Σ_{t ∈ G_c} h_t − τ²|G_c| / 2`. With `head_leakage > 0`,
//! class 0's weight row also reads every domain neuron with that weight, so
//! the target-domain shift biases predictions toward class 0, mimicking a
//! head that picked up domain-specific features during training.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IdaniError, Result};
use crate::eval::{classify, score, ClassifierHead, Metric};
use crate::repr_store::{save_set, Format, RepresentationSet};

/// Name of the PRNG recorded in the ground-truth file.
pub const RNG_NAME: &str = "ChaCha8Rng";

const TOKEN_VOCAB: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub d: usize,
    pub n_per_domain: usize,
    pub m_domain: usize,
    pub domain_shift: f64,
    pub task_neurons: usize,
    pub task_separation: f64,
    pub noise_sigma: f64,
    pub n_classes: usize,
    /// Weight of class 0's head row on each domain neuron.
    pub head_leakage: f64,
    /// Attach a random token (`tok00`…`tok15`) to every row.
    pub tokens: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            d: 128,
            n_per_domain: 2000,
            m_domain: 20,
            domain_shift: 3.0,
            task_neurons: 4,
            task_separation: 2.0,
            noise_sigma: 1.0,
            n_classes: 2,
            head_leakage: 0.0,
            tokens: false,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(IdaniError::Validation(msg));
        if self.d == 0 || self.n_per_domain == 0 || self.m_domain == 0 || self.task_neurons == 0 {
            return fail("d, n_per_domain, m_domain and task_neurons must be ≥ 1".into());
        }
        if self.m_domain + self.task_neurons > self.d {
            return fail(format!(
                "m_domain + task_neurons = {} exceeds d = {}",
                self.m_domain + self.task_neurons,
                self.d
            ));
        }
        if self.n_classes < 2 || self.task_neurons < self.n_classes {
            return fail(format!(
                "need n_classes ≥ 2 and at least one task neuron per class (got {} classes, {} task neurons)",
                self.n_classes, self.task_neurons
            ));
        }
        let finite = [self.domain_shift, self.task_separation, self.head_leakage]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return fail("shift, separation and leakage must be finite and sigma positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Sorted ascending.
    pub domain_neurons: Vec<usize>,
    /// Sorted ascending.
    pub task_neurons: Vec<usize>,
    pub spec: SynthSpec,
    pub rng: String,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub source: RepresentationSet,
    pub target: RepresentationSet,
    pub head: ClassifierHead,
    pub truth: GroundTruth,
}

impl SynthOutput {
    /// Head score on the labeled source set.
    pub fn source_score(&self) -> Result<f64> {
        eval_head(&self.head, &self.source)
    }

    pub fn target_score(&self) -> Result<f64> {
        eval_head(&self.head, &self.target)
    }

    /// Writes `source.<ext>`, `target.<ext>`, `head.json` and `truth.json`.
    pub fn write_to(&self, dir: impl AsRef<Path>, format: Format) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| IdaniError::io(dir, e))?;
        let ext = format.extension();
        let source = dir.join(format!("source.{ext}"));
        let target = dir.join(format!("target.{ext}"));
        let head = dir.join("head.json");
        let truth = dir.join("truth.json");
        save_set(&self.source, &source, format)?;
        save_set(&self.target, &target, format)?;
        self.head.save(&head)?;
        let text = serde_json::to_string_pretty(&self.truth)? + "\n";
        fs::write(&truth, text).map_err(|e| IdaniError::io(&truth, e))?;
        Ok(vec![source, target, head, truth])
    }
}

fn eval_head(head: &ClassifierHead, set: &RepresentationSet) -> Result<f64> {
    let labels = set.labels().expect("synthetic sets are labeled");
    Ok(score(&classify(head, set)?, labels, head.metric(), head.n_classes())?.value)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut perm: Vec<usize> = (0..spec.d).collect();
    perm.shuffle(&mut rng);
    let domain_neurons = perm[..spec.m_domain].to_vec();
    // task neuron t serves class t % C, in draw order
    let task_neurons = perm[spec.m_domain..spec.m_domain + spec.task_neurons].to_vec();

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let mut token_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    token_rng.set_stream(1);

    let mut draw = |name: &str, shift: f64| -> Result<RepresentationSet> {
        let mut data = Vec::with_capacity(spec.n_per_domain * spec.d);
        let mut labels = Vec::with_capacity(spec.n_per_domain);
        let mut row = vec![0.0f64; spec.d];
        for _ in 0..spec.n_per_domain {
            let y = rng.random_range(0..spec.n_classes);
            for v in row.iter_mut() {
                *v = noise.sample(&mut rng);
            }
            for (t, &n) in task_neurons.iter().enumerate() {
                if t % spec.n_classes == y {
                    row[n] += spec.task_separation;
                }
            }
            if shift != 0.0 {
                for &n in &domain_neurons {
                    row[n] += shift;
                }
            }
            data.extend(row.iter().map(|&v| v as f32));
            labels.push(y as i32);
        }
        let tokens = spec.tokens.then(|| {
            (0..spec.n_per_domain)
                .map(|_| format!("tok{:02}", token_rng.random_range(0..TOKEN_VOCAB)))
                .collect()
        });
        RepresentationSet::new(name, spec.d, data, Some(labels), tokens)
    };
    let source = draw("source", 0.0)?;
    let target = draw("target", spec.domain_shift)?;

    let tau = spec.task_separation;
    let mut weights = vec![vec![0.0; spec.d]; spec.n_classes];
    let mut group_size = vec![0usize; spec.n_classes];
    for (t, &n) in task_neurons.iter().enumerate() {
        weights[t % spec.n_classes][n] = tau;
        group_size[t % spec.n_classes] += 1;
    }
    if spec.head_leakage != 0.0 {
        for &n in &domain_neurons {
            weights[0][n] = spec.head_leakage;
        }
    }
    let bias = group_size
        .iter()
        .map(|&g| -tau * tau * g as f64 / 2.0)
        .collect();
    let class_names = (0..spec.n_classes).map(|c| format!("class_{c}")).collect();
    let head = ClassifierHead::new(weights, bias, class_names, Metric::Accuracy)?;

    let mut domain_sorted = domain_neurons;
    domain_sorted.sort_unstable();
    let mut task_sorted = task_neurons;
    task_sorted.sort_unstable();
    Ok(SynthOutput {
        source,
        target,
        head,
        truth: GroundTruth {
            domain_neurons: domain_sorted,
            task_neurons: task_sorted,
            spec: spec.clone(),
            rng: RNG_NAME.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            d: 16,
            n_per_domain: 200,
            m_domain: 3,
            task_neurons: 2,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
        assert_eq!(a.head, b.head);
        assert_eq!(a.truth, b.truth);
        let c = generate(&SynthSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.source, c.source);
    }

    #[test]
    fn truth_sets_disjoint_and_in_range() {
        let out = generate(&small()).unwrap();
        let t = &out.truth;
        assert_eq!(t.domain_neurons.len(), 3);
        assert_eq!(t.task_neurons.len(), 2);
        assert!(t.domain_neurons.iter().all(|n| !t.task_neurons.contains(n)));
        assert!(t.domain_neurons.iter().chain(&t.task_neurons).all(|&n| n < 16));
        assert_eq!(t.rng, RNG_NAME);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&SynthSpec { m_domain: 15, ..small() }).is_err());
        assert!(generate(&SynthSpec { noise_sigma: 0.0, ..small() }).is_err());
        assert!(generate(&SynthSpec { n_classes: 3, ..small() }).is_err());
        assert!(generate(&SynthSpec { domain_shift: f64::NAN, ..small() }).is_err());
    }

    #[test]
    fn head_reads_only_task_neurons_without_leakage() {
        let out = generate(&small()).unwrap();
        for (i, w) in out.head.weights().iter().flatten().enumerate() {
            let n = i % 16;
            if *w != 0.0 {
                assert!(out.truth.task_neurons.contains(&n));
            }
        }
    }

    #[test]
    fn tokens_do_not_disturb_data_stream() {
        let plain = generate(&small()).unwrap();
        let tok = generate(&SynthSpec { tokens: true, ..small() }).unwrap();
        assert_eq!(plain.source.data(), tok.source.data());
        assert_eq!(tok.target.tokens().unwrap().len(), 200);
    }

    #[test]
    fn spec_json_fills_defaults() {
        let spec: SynthSpec = serde_json::from_str(r#"{"seed": 3, "d": 64}"#).unwrap();
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.d, 64);
        assert_eq!(spec.m_domain, 20);
    }
}
