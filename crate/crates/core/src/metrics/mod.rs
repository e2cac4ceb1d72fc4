//! Statistical and distance-based fidelity metrics with separability
//! decisions.
//!
//! Statistical metrics carry a p-value and are separable when it falls
//! below alpha. Distance metrics carry a bootstrap confidence interval
//! of the metric on original data and are separable when the observed
//! value falls outside it.

mod bootstrap;
mod distance;
pub mod special;
mod statistical;

pub use bootstrap::{bootstrap_separability, BootstrapSpec, Goal, MetricIdent};
pub use distance::{
    bin_numeric_pair, categorical_distance, mmd, mmd_from_rows, pcd, wasserstein1, DistanceKind,
};
pub use statistical::{cardinality_shape_similarity, chi2_two_sample, ks_two_sample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty sample")]
    EmptySample,
    #[error("only one category shared by both samples (zero degrees of freedom)")]
    SingleCategory,
    #[error("fewer than 2 numeric columns available")]
    TooFewNumericColumns,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("bootstrap replicate {index} failed: {message}")]
    BootstrapReplicate { index: usize, message: String },
    #[error(transparent)]
    Aggregate(#[from] crate::aggregate::AggregateError),
}

/// Granularity of a metric target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    SingleColumn,
    SingleTable,
    MultiTable,
}

/// Outcome of one metric evaluation with its separability decision.
/// Exactly one of `p_value` and `ci` is present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: String,
    pub granularity: Granularity,
    pub table: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    pub separable: bool,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricResult {
    /// Statistical route: separable iff `p_value < alpha`.
    pub fn from_p_value(
        metric: impl Into<String>,
        granularity: Granularity,
        table: impl Into<String>,
        column: Option<String>,
        value: f64,
        p_value: f64,
        alpha: f64,
    ) -> MetricResult {
        MetricResult {
            metric: metric.into(),
            granularity,
            table: table.into(),
            column,
            value,
            p_value: Some(p_value),
            ci: None,
            separable: p_value < alpha,
            alpha,
            notes: Vec::new(),
        }
    }

    /// Bootstrap route: separable iff the observed value falls outside
    /// the confidence interval.
    pub fn from_ci(
        metric: impl Into<String>,
        granularity: Granularity,
        table: impl Into<String>,
        column: Option<String>,
        value: f64,
        ci: (f64, f64),
        alpha: f64,
    ) -> MetricResult {
        MetricResult {
            metric: metric.into(),
            granularity,
            table: table.into(),
            column,
            value,
            p_value: None,
            ci: Some(ci),
            separable: value < ci.0 || value > ci.1,
            alpha,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> MetricResult {
        self.notes.push(note.into());
        self
    }
}
