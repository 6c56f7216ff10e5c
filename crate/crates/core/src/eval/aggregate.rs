// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cross-seed aggregation (mean ± standard error) and the
//! improved / damaged / neither categorization.

use serde::{Deserialize, Serialize};

use super::sweep::SweepReport;
use crate::error::{IdaniError, Result};
use crate::ranking::RankMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Improved,
    Damaged,
    Neither,
}

/// Improved iff `mean > sem`, damaged iff `mean < −sem`.
pub fn categorize(mean_delta: f64, sem: f64) -> Category {
    debug_assert!(sem >= 0.0);
    if mean_delta > sem {
        Category::Improved
    } else if mean_delta < -sem {
        Category::Damaged
    } else {
        Category::Neither
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 divisor) over `√n`.
    pub sem: f64,
    pub n_seeds: usize,
}

impl QuantityStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(IdaniError::InvalidArgument(format!(
                "standard error needs at least 2 seeds, got {n}"
            )));
        }
        // Offsetting by the first value keeps the mean of a constant exact.
        let x0 = values[0];
        let mean = x0 + values.iter().map(|v| v - x0).sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            sem: (var / n as f64).sqrt(),
            n_seeds: n,
        })
    }

    pub fn category(&self) -> Category {
        categorize(self.mean, self.sem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: RankMethod,
    /// `None` when the reports' grids lack the default cell.
    pub delta_default: Option<QuantityStats>,
    pub category_default: Option<Category>,
    pub delta_oracle: QuantityStats,
    pub category_oracle: Category,
}

/// One row of the improved / damaged / neither summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// `delta_8_50` or `delta_oracle`.
    pub quantity: String,
    pub method: RankMethod,
    pub improved: usize,
    pub damaged: usize,
    pub neither: usize,
    /// Mean over experiments of the cross-seed mean delta.
    pub avg_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub source_domain: String,
    pub target_domain: String,
    pub metric: String,
    pub seeds: Vec<u64>,
    pub init: QuantityStats,
    pub methods: Vec<MethodAggregate>,
    /// Summary table for this single experiment.
    pub table: Vec<TableRow>,
}

pub fn aggregate_seeds(reports: &[SweepReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or_else(|| {
        IdaniError::InvalidArgument("standard error needs at least 2 seeds, got 0".into())
    })?;
    let key = first.grid_key();
    let method_order: Vec<RankMethod> = first.methods.iter().map(|m| m.method).collect();
    for (i, r) in reports.iter().enumerate().skip(1) {
        if r.grid_key() != key || r.methods.iter().map(|m| m.method).ne(method_order.iter().copied()) {
            return Err(IdaniError::Validation(format!(
                "report {i} (seed {}) has a different grid from report 0",
                r.seed
            )));
        }
        if r.metric != first.metric {
            return Err(IdaniError::Validation(format!(
                "report {i} uses metric {} but report 0 uses {}",
                r.metric, first.metric
            )));
        }
    }

    let inits: Vec<f64> = reports.iter().map(|r| r.init_score).collect();
    let init = QuantityStats::from_values(&inits)?;

    let mut methods = Vec::with_capacity(method_order.len());
    for (mi, &method) in method_order.iter().enumerate() {
        let oracle: Vec<f64> = reports.iter().map(|r| r.methods[mi].delta_oracle).collect();
        let delta_oracle = QuantityStats::from_values(&oracle)?;
        let defaults: Option<Vec<f64>> = reports.iter().map(|r| r.methods[mi].delta_default).collect();
        let delta_default = defaults.as_deref().map(QuantityStats::from_values).transpose()?;
        methods.push(MethodAggregate {
            method,
            category_default: delta_default.as_ref().map(QuantityStats::category),
            delta_default,
            category_oracle: delta_oracle.category(),
            delta_oracle,
        });
    }

    let mut report = AggregateReport {
        source_domain: first.source_domain.clone(),
        target_domain: first.target_domain.clone(),
        metric: first.metric.clone(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        init,
        methods,
        table: Vec::new(),
    };
    report.table = summarize_experiments(std::slice::from_ref(&report));
    Ok(report)
}

/// Counts improved / damaged / neither experiments per quantity and method,
/// with the average of the mean deltas.
pub fn summarize_experiments(experiments: &[AggregateReport]) -> Vec<TableRow> {
    let mut methods: Vec<RankMethod> = Vec::new();
    for e in experiments {
        for m in &e.methods {
            if !methods.contains(&m.method) {
                methods.push(m.method);
            }
        }
    }
    let mut rows = Vec::new();
    for (quantity, pick) in [
        ("delta_8_50", (|m: &MethodAggregate| m.delta_default) as fn(&MethodAggregate) -> Option<QuantityStats>),
        ("delta_oracle", |m: &MethodAggregate| Some(m.delta_oracle)),
    ] {
        for &method in &methods {
            let stats: Vec<QuantityStats> = experiments
                .iter()
                .flat_map(|e| e.methods.iter().filter(|m| m.method == method))
                .filter_map(pick)
                .collect();
            if stats.is_empty() {
                continue;
            }
            let mut row = TableRow {
                quantity: quantity.to_string(),
                method,
                improved: 0,
                damaged: 0,
                neither: 0,
                avg_delta: stats.iter().map(|s| s.mean).sum::<f64>() / stats.len() as f64,
            };
            for s in &stats {
                match s.category() {
                    Category::Improved => row.improved += 1,
                    Category::Damaged => row.damaged += 1,
                    Category::Neither => row.neither += 1,
                }
            }
            rows.push(row);
        }
    }
    rows
}
