//! Discriminative detection: classifier two-sample tests between a real
//! and a synthetic database.
//!
//! Rows from both sides are labeled (real = 1, synthetic = 0), a
//! classifier is cross-validated on the stack, and the pooled
//! out-of-fold accuracy is tested against the chance baseline
//! max(n,m)/(n+m) with an exact binomial test. Any better-than-random
//! accuracy implies a deviation from perfect fidelity; accuracy
//! significantly *below* the baseline is a data-copying diagnostic.
//!
//! Variants: plain detection on one table's columns, detection after
//! relational aggregation (multi-table fidelity), logistic detection
//! (the legacy single-model special case), and parent-child detection on
//! denormalized pairs, kept only as a flagged legacy metric because
//! denormalization breaks the i.i.d. assumption the test relies on.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{relational_aggregation, AggregateError, AggregatedTable, AggregationSpec};
use crate::data::{denormalize, Database, Relationship, SchemaError, Table};
use crate::learn::{
    feature_importance, preprocess, stratified_kfold_predictions, ImportanceEntry, LearnError,
    LearnerKind, LearnerSpec,
};
use crate::metrics::special::{binom_tail_lower, binom_tail_upper};
use crate::seed::{derive_seed, rng};

/// Combined row cap; larger inputs are subsampled per side before
/// detection to bound runtime.
pub const DEFAULT_ROW_CAP: usize = 50_000;

const DEFAULT_COPYING_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("empty column selection")]
    EmptyColumnSelection,
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("baseline must satisfy 0.5 <= p0 < 1, got {0}")]
    InvalidBaseline(f64),
    #[error("empty loss vector")]
    EmptyLosses,
    #[error("table {0} has no child tables; aggregation detection needs at least one")]
    NoChildTables(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

/// Data-copying flag derived from the lower binomial tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyFlag {
    None,
    SuspectedCopying,
}

/// Outcome of one detection run.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionResult {
    pub metric: String,
    pub table: String,
    /// pooled out-of-fold accuracy; always 1 − mean(losses)
    pub accuracy: f64,
    /// per-example 0–1 losses aligned to the (possibly subsampled)
    /// stacked input rows
    #[serde(skip)]
    pub losses: Vec<f64>,
    /// chance baseline p0 = max(n,m)/(n+m)
    pub baseline: f64,
    /// upper-tail binomial p-value (better than chance)
    pub p_value: f64,
    /// lower-tail binomial p-value (worse than chance; copying)
    pub p_value_lower: f64,
    pub auc: f64,
    /// 2·max(AUC, ½) − 1; kept because it can mask copying
    pub legacy_ld_score: f64,
    pub learner: LearnerSpec,
    pub folds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub importances: Option<Vec<ImportanceEntry>>,
    pub copying_flag: CopyFlag,
    /// non-suppressible caveat for legacy metrics
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
    pub cap_triggered: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DetectionResult {
    pub fn separable(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Exact one-sided binomial tails for a 0–1 loss vector against the
/// baseline success probability `p0`. Returns (p_upper, p_lower) for
/// s = #correct: P[Bin(N, p0) >= s] and P[Bin(N, p0) <= s].
pub fn binomial_detection_test(losses: &[f64], p0: f64) -> Result<(f64, f64), DetectError> {
    if losses.is_empty() {
        return Err(DetectError::EmptyLosses);
    }
    if !(0.5..1.0).contains(&p0) {
        return Err(DetectError::InvalidBaseline(p0));
    }
    let n = losses.len() as u64;
    let s = losses.iter().filter(|&&l| l == 0.0).count() as u64;
    Ok((binom_tail_upper(n, p0, s), binom_tail_lower(n, p0, s)))
}

/// Options threaded through every detection entry point.
struct RunConfig {
    metric: String,
    folds: usize,
    seed: u64,
    row_cap: usize,
    caveat: Option<String>,
}

/// Core of the detection test on an already-assembled table pair.
fn detect_tables(
    real: &AggregatedTable,
    syn: &AggregatedTable,
    learner: &LearnerSpec,
    cfg: RunConfig,
) -> Result<DetectionResult, DetectError> {
    let mut warnings = Vec::new();

    // subsample per side when the stack exceeds the row cap
    let (n0, m0) = (real.table.row_count(), syn.table.row_count());
    let cap_triggered = n0 + m0 > cfg.row_cap;
    let (real_capped, syn_capped);
    let (real, syn) = if cap_triggered {
        let n_target = ((cfg.row_cap as f64) * (n0 as f64) / ((n0 + m0) as f64)).floor() as usize;
        let m_target = cfg.row_cap - n_target;
        real_capped = AggregatedTable {
            table: sample_rows(&real.table, n_target.max(1), derive_seed(cfg.seed, 0xA)),
            provenance: real.provenance.clone(),
        };
        syn_capped = AggregatedTable {
            table: sample_rows(&syn.table, m_target.max(1), derive_seed(cfg.seed, 0xB)),
            provenance: syn.provenance.clone(),
        };
        warnings.push(format!(
            "row cap {} applied: {}+{} rows subsampled to {}+{}",
            cfg.row_cap,
            n0,
            m0,
            real_capped.table.row_count(),
            syn_capped.table.row_count()
        ));
        (&real_capped, &syn_capped)
    } else {
        (real, syn)
    };

    let (features, labels) = preprocess(real, syn)?;
    warnings.extend(features.notes().iter().cloned());
    let (n, m) = (real.table.row_count(), syn.table.row_count());
    let p0 = n.max(m) as f64 / (n + m) as f64;

    let min_class = n.min(m);
    let folds = if cfg.folds > min_class {
        warnings.push(format!(
            "fold count reduced from {} to {min_class} (smallest side)",
            cfg.folds
        ));
        min_class
    } else {
        cfg.folds
    };

    let learner = learner.clone();
    let (losses, probs) =
        stratified_kfold_predictions(&learner, &features, &labels, folds, cfg.seed)?;
    let accuracy = 1.0 - losses.iter().sum::<f64>() / losses.len() as f64;
    let (p_upper, p_lower) = binomial_detection_test(&losses, p0)?;
    let auc = rank_auc(&probs, &labels);
    let legacy_ld_score = 2.0 * auc.max(0.5) - 1.0;
    let importances = match learner.kind {
        LearnerKind::Knn => None,
        _ => {
            // refit on the full stack for the explanation
            let model = crate::learn::fit(&learner, &features, &labels)?;
            Some(feature_importance(&model)?)
        }
    };
    let copying_flag = if p_lower < DEFAULT_COPYING_ALPHA {
        CopyFlag::SuspectedCopying
    } else {
        CopyFlag::None
    };

    Ok(DetectionResult {
        metric: cfg.metric,
        table: real.table.name().to_string(),
        accuracy,
        losses,
        baseline: p0,
        p_value: p_upper,
        p_value_lower: p_lower,
        auc,
        legacy_ld_score,
        learner,
        folds,
        importances,
        copying_flag,
        caveat: cfg.caveat,
        cap_triggered,
        warnings,
    })
}

fn sample_rows(table: &Table, k: usize, seed: u64) -> Table {
    let mut idx: Vec<usize> = (0..table.row_count()).collect();
    let mut gen = rng(seed);
    idx.shuffle(&mut gen);
    idx.truncate(k);
    idx.sort_unstable();
    table.subset(&idx)
}

/// AUC from pooled out-of-fold probabilities via the rank statistic,
/// with tied probabilities receiving average ranks.
fn rank_auc(probs: &[f64], labels: &[f64]) -> f64 {
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).expect("finite probs"));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            rank[o] = avg;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let n_neg = n as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return 0.5;
    }
    let rank_sum: f64 = labels
        .iter()
        .zip(rank.iter())
        .filter(|(&y, _)| y == 1.0)
        .map(|(_, &r)| r)
        .sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Discriminative detection on one table. `columns` selects the target
/// columns (attribute columns only); `None` uses every shared non-key
/// column.
pub fn discriminative_detection(
    db_real: &Database,
    db_syn: &Database,
    table: &str,
    columns: Option<&[String]>,
    learner: &LearnerSpec,
    k: usize,
    seed: u64,
) -> Result<DetectionResult, DetectError> {
    let real = db_real
        .table(table)
        .ok_or_else(|| DetectError::UnknownTable(table.to_string()))?;
    let syn = db_syn
        .table(table)
        .ok_or_else(|| DetectError::UnknownTable(table.to_string()))?;

    let selected: Vec<&str> = match columns {
        Some(cols) => cols.iter().map(|s| s.as_str()).collect(),
        None => real
            .meta()
            .attribute_columns()
            .iter()
            .map(|c| c.name.as_str())
            .filter(|name| syn.column(name).is_some())
            .collect(),
    };
    if selected.is_empty() {
        return Err(DetectError::EmptyColumnSelection);
    }
    let real_sel = real
        .select_attributes(&selected)
        .map_err(|e| DetectError::UnknownColumn(e.to_string()))?;
    let syn_sel = syn
        .select_attributes(&selected)
        .map_err(|e| DetectError::UnknownColumn(e.to_string()))?;

    detect_tables(
        &AggregatedTable::from_original(&real_sel),
        &AggregatedTable::from_original(&syn_sel),
        learner,
        RunConfig {
            metric: format!("dd-{}", learner.name()),
            folds: k,
            seed,
            row_cap: DEFAULT_ROW_CAP,
            caveat: None,
        },
    )
}

/// Detection on the relational aggregation of `table`: the table must
/// have at least one child. Importances carry the original/aggregate
/// provenance of each feature.
pub fn discriminative_detection_with_aggregation(
    db_real: &Database,
    db_syn: &Database,
    table: &str,
    learner: &LearnerSpec,
    k: usize,
    seed: u64,
) -> Result<DetectionResult, DetectError> {
    if db_real.schema().children_of(table).is_empty() {
        return Err(DetectError::NoChildTables(table.to_string()));
    }
    let spec = AggregationSpec::default();
    let real = relational_aggregation(db_real, table, &spec)?;
    let syn = relational_aggregation(db_syn, table, &spec)?;
    detect_tables(
        &real,
        &syn,
        learner,
        RunConfig {
            metric: format!("dda-{}", learner.name()),
            folds: k,
            seed,
            row_cap: DEFAULT_ROW_CAP,
            caveat: None,
        },
    )
}

/// Legacy logistic detection: discriminative detection specialized to
/// the logistic learner, reported with the legacy 2·max(AUC, ½) − 1
/// score populated.
pub fn logistic_detection(
    db_real: &Database,
    db_syn: &Database,
    table: &str,
    columns: Option<&[String]>,
    k: usize,
    seed: u64,
) -> Result<DetectionResult, DetectError> {
    let mut result = discriminative_detection(
        db_real,
        db_syn,
        table,
        columns,
        &LearnerSpec::logistic().with_seed(seed),
        k,
        seed,
    )?;
    result.metric = "ld".to_string();
    Ok(result)
}

/// Legacy parent-child detection on denormalized pairs. Denormalization
/// correlates rows that share a parent, so accuracy can exceed the
/// baseline even for identical databases; the result always carries a
/// caveat and is excluded from default benchmark suites.
pub fn parent_child_detection(
    db_real: &Database,
    db_syn: &Database,
    relationship: &Relationship,
    learner: &LearnerSpec,
    k: usize,
    seed: u64,
) -> Result<DetectionResult, DetectError> {
    let real = denormalize(db_real, &relationship.parent, &relationship.child)?;
    let syn = denormalize(db_syn, &relationship.parent, &relationship.child)?;
    detect_tables(
        &AggregatedTable::from_original(&real),
        &AggregatedTable::from_original(&syn),
        learner,
        RunConfig {
            metric: format!("pc-{}", learner.name()),
            folds: k,
            seed,
            row_cap: DEFAULT_ROW_CAP,
            caveat: Some(
                "legacy metric: denormalization violates the i.i.d. assumption; \
                 accuracy can exceed the baseline even on identical databases"
                    .to_string(),
            ),
        },
    )
}

/// Data-copying diagnostic: fires when accuracy is significantly below
/// the chance baseline.
pub fn data_copying_diagnostic(result: &DetectionResult, alpha: f64) -> CopyFlag {
    if result.p_value_lower < alpha {
        CopyFlag::SuspectedCopying
    } else {
        CopyFlag::None
    }
}
