// SPDX-License-Identifier: MIT OR Apache-2.0

//! # idani-core
//!
//! Inference-time domain adaptation through neuron-level interventions on
//! exported representations.
//!
//! The pipeline has four steps:
//!
//! 1. Load source- and target-domain representation sets and compute their
//!    element-wise means ([`repr_store`]).
//! 2. Rank neurons by how much domain information they carry, either from
//!    the absolute mean difference or from the weights of an elastic-net
//!    domain probe ([`ranking`]).
//! 3. Shift each target representation toward the source mean in the
//!    `k` highest-ranked neurons, scaled by a log-decaying coefficient
//!    vector with maximum `beta` ([`intervention`]).
//! 4. Classify the shifted representations with the unchanged task head and
//!    score them against the initial (unshifted) performance ([`eval`]).
//!
//! [`synth`] generates source/target sets with planted domain neurons and a
//! matching head so every step has a ground truth to check against.

pub mod error;
pub mod eval;
pub mod intervention;
pub mod ranking;
pub mod repr_store;
pub mod synth;

pub use error::{IdaniError, Result};
pub use eval::{
    aggregate_seeds, categorize, classify, run_sweep, score, summarize_experiments,
    token_attribution, AggregateReport, Category, ClassifierHead, Metric, SweepConfig,
    SweepReport,
};
pub use intervention::{build_alpha, intervene, make_plan, InterventionPlan};
pub use ranking::{
    linear_rank, probeless_rank, top_k, train_domain_probe, DomainProbe, NeuronRanking,
    ProbeHyper, RankMethod,
};
pub use repr_store::{compute_mean, load_set, save_set, Format, MeanVector, RepresentationSet};
pub use synth::{generate, GroundTruth, SynthOutput, SynthSpec};

/// Version string embedded in every JSON document the tools emit.
pub const TOOL_VERSION: &str = concat!("idani ", env!("CARGO_PKG_VERSION"));
