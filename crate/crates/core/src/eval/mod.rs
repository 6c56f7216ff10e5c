// SPDX-License-Identifier: MIT OR Apache-2.0

//! Frozen-head evaluation: classification, task metrics, the `(k, beta)`
//! sweep, cross-seed aggregation and per-token attribution.

mod aggregate;
mod attribution;
mod head;
mod metrics;
mod sweep;

pub use aggregate::{
    aggregate_seeds, categorize, summarize_experiments, AggregateReport, Category,
    MethodAggregate, QuantityStats, TableRow,
};
pub use attribution::{attribute_sets, token_attribution, TokenDelta};
pub use head::{classify, ClassifierHead, HeadJson, Metric};
pub use metrics::{correctness, score, Score};
pub use sweep::{
    default_beta_grid, default_k_grid, rank_with, run_sweep, MethodSummary, SweepCell, SweepConfig,
    SweepReport, DEFAULT_BETA, DEFAULT_K,
};
