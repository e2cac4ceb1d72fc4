use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Granularity, MetricError, MetricResult};
use crate::data::Table;
use crate::seed::{derive_seed, rng};

/// Whether smaller or larger metric values mean better fidelity.
/// Recorded alongside results; the two-sided interval decision does not
/// depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    Minimize,
    Maximize,
}

/// Bootstrap protocol for distance metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Support bounds of the metric; the interval is clipped to them.
    pub support: (f64, f64),
    pub goal: Goal,
}

impl BootstrapSpec {
    pub fn new(seed: u64) -> BootstrapSpec {
        BootstrapSpec {
            replications: 1000,
            alpha: 0.05,
            seed,
            support: (0.0, 1.0),
            goal: Goal::Minimize,
        }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> BootstrapSpec {
        self.support = (lo, hi);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> BootstrapSpec {
        self.alpha = alpha;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> BootstrapSpec {
        self.replications = replications;
        self
    }
}

/// Identity of the metric being bootstrapped, carried into the result.
#[derive(Debug, Clone)]
pub struct MetricIdent {
    pub metric: String,
    pub granularity: Granularity,
    pub table: String,
    pub column: Option<String>,
}

/// Approximates the sampling distribution of `metric` on the original
/// data: each replicate draws two independent with-replacement resamples
/// of `real` (each of original size) and records the metric between
/// them. The percentile interval, clipped to the metric's support, is
/// the null band; `observed_value` outside it means the metric separates
/// synthetic from real.
///
/// Replicate seeds derive from the root seed and replicate index, so the
/// result is independent of execution order and worker count.
pub fn bootstrap_separability<F>(
    metric: F,
    real: &Table,
    observed_value: f64,
    spec: &BootstrapSpec,
    ident: MetricIdent,
) -> Result<MetricResult, MetricError>
where
    F: Fn(&Table, &Table) -> Result<f64, MetricError> + Sync,
{
    if spec.replications < 100 {
        return Err(MetricError::InvalidSpec(format!(
            "replications must be >= 100, got {}",
            spec.replications
        )));
    }
    if real.row_count() == 0 {
        return Err(MetricError::EmptySample);
    }
    let n = real.row_count();
    let mut values: Vec<f64> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let mut gen = rng(derive_seed(spec.seed, r as u64));
            let idx_a: Vec<usize> = (0..n).map(|_| gen.gen_range(0..n)).collect();
            let idx_b: Vec<usize> = (0..n).map(|_| gen.gen_range(0..n)).collect();
            let sample_a = real.subset(&idx_a);
            let sample_b = real.subset(&idx_b);
            metric(&sample_a, &sample_b).map_err(|e| MetricError::BootstrapReplicate {
                index: r,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<f64>, MetricError>>()?;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));

    let lo = quantile_sorted(&values, spec.alpha / 2.0).max(spec.support.0);
    let hi = quantile_sorted(&values, 1.0 - spec.alpha / 2.0).min(spec.support.1);
    Ok(MetricResult::from_ci(
        ident.metric,
        ident.granularity,
        ident.table,
        ident.column,
        observed_value,
        (lo, hi),
        spec.alpha,
    ))
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let l = sorted.len();
    if l == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (l - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
