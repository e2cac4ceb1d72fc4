//! In-house learners, preprocessing, cross-validation, and
//! interpretability used by detection and utility.

mod cv;
mod logistic;
mod preprocess;
mod tree;

pub use cv::{stratified_fold_assignment, stratified_kfold_losses, stratified_kfold_predictions};
pub use preprocess::{
    preprocess, preprocess_pair, Encoder, FeatureMatrix, LabelVector, CATEGORY_CAP,
    MISSING_CATEGORY, OTHER_CATEGORY,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::Provenance;
use tree::{build_tree, SortedIndex, Tree, TreeParams};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("classification input contains a single class")]
    SingleClass,
    #[error("class count {class_count} is smaller than fold count {k}")]
    FoldCount { class_count: usize, k: usize },
    #[error("learner kind {0:?} does not support feature importances")]
    UnsupportedImportance(LearnerKind),
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Logistic,
    Gbt,
    Linear,
    Tree,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// A learner, its hyperparameters, and a seed. Constructors give the
/// documented defaults per kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub task: Task,
    pub seed: u64,
    /// boosting rounds (gbt)
    pub rounds: usize,
    /// tree depth limit (gbt, tree)
    pub max_depth: usize,
    /// shrinkage (gbt)
    pub learning_rate: f64,
    /// minimum samples per leaf (gbt, tree)
    pub min_samples_leaf: usize,
    /// leaf-value L2 (gbt, tree)
    pub tree_l2: f64,
    /// L2 strength on the sum-of-losses scale (logistic)
    pub l2: f64,
    /// gradient-norm tolerance (logistic)
    pub tol: f64,
    /// iteration cap (logistic)
    pub max_iter: usize,
    /// neighbor count (knn)
    pub k_neighbors: usize,
}

impl LearnerSpec {
    fn base(kind: LearnerKind) -> LearnerSpec {
        LearnerSpec {
            kind,
            task: Task::Classification,
            seed: 0,
            rounds: 100,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            tree_l2: 1.0,
            l2: 1.0,
            tol: 1e-6,
            max_iter: 1000,
            k_neighbors: 5,
        }
    }

    pub fn logistic() -> LearnerSpec {
        Self::base(LearnerKind::Logistic)
    }

    pub fn gbt() -> LearnerSpec {
        Self::base(LearnerKind::Gbt)
    }

    pub fn linear() -> LearnerSpec {
        let mut s = Self::base(LearnerKind::Linear);
        s.task = Task::Regression;
        s
    }

    pub fn tree() -> LearnerSpec {
        Self::base(LearnerKind::Tree)
    }

    pub fn knn() -> LearnerSpec {
        Self::base(LearnerKind::Knn)
    }

    pub fn with_task(mut self, task: Task) -> LearnerSpec {
        self.task = task;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> LearnerSpec {
        self.seed = seed;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LearnerKind::Logistic => "logistic",
            LearnerKind::Gbt => "gbt",
            LearnerKind::Linear => "linear",
            LearnerKind::Tree => "tree",
            LearnerKind::Knn => "knn",
        }
    }

    pub fn check(&self) -> Result<(), LearnError> {
        if self.rounds == 0 || self.max_depth == 0 {
            return Err(LearnError::InvalidSpec(
                "rounds and max_depth must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(LearnError::InvalidSpec(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        if self.min_samples_leaf == 0 || self.k_neighbors == 0 {
            return Err(LearnError::InvalidSpec(
                "min_samples_leaf and k_neighbors must be positive".into(),
            ));
        }
        if self.l2 < 0.0 || self.tree_l2 < 0.0 || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(LearnError::InvalidSpec(
                "regularization must be nonnegative, tol positive".into(),
            ));
        }
        Ok(())
    }
}

/// One ranked feature-importance entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub weight: f64,
    pub provenance: Provenance,
}

enum ModelInner {
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    Gbt {
        base: f64,
        trees: Vec<Tree>,
        gains: Vec<f64>,
        loss_curve: Vec<f64>,
    },
    Tree {
        tree: Tree,
        gains: Vec<f64>,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        train_rows: Vec<Vec<f64>>,
        train_y: Vec<f64>,
    },
}

/// A fitted model. Predictions are deterministic functions of
/// (spec, training data, seed); the struct is immutable and shareable.
pub struct FitModel {
    spec: LearnerSpec,
    feature_names: Vec<String>,
    provenance: Vec<Provenance>,
    inner: ModelInner,
}

impl FitModel {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Raw model output for one feature row: probability of class 1 for
    /// classification, predicted value for regression.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let raw = match &self.inner {
            ModelInner::Logistic { weights, bias } => {
                sigmoid(dot(weights, row) + bias)
            }
            ModelInner::Gbt { base, trees, .. } => {
                let score: f64 =
                    base + trees.iter().map(|t| t.predict_row(row)).sum::<f64>();
                match self.spec.task {
                    Task::Classification => sigmoid(score),
                    Task::Regression => score,
                }
            }
            ModelInner::Tree { tree, .. } => tree.predict_row(row),
            ModelInner::Linear { weights, bias } => dot(weights, row) + bias,
            ModelInner::Knn { train_rows, train_y } => {
                knn_predict(train_rows, train_y, row, self.spec.k_neighbors)
            }
        };
        match self.spec.task {
            Task::Classification => raw.clamp(0.0, 1.0),
            Task::Regression => raw,
        }
    }

    /// Model outputs for every row of `x` (see [`Self::predict_row`]).
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// Class labels (classification, threshold 0.5 with ties going to
    /// class 1) or predicted values (regression).
    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let probs = self.predict_proba(x);
        match self.spec.task {
            Task::Classification => probs
                .into_iter()
                .map(|p| if p >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
            Task::Regression => probs,
        }
    }

    /// Per-round training loss, available for boosted models.
    pub fn training_loss_curve(&self) -> Option<&[f64]> {
        match &self.inner {
            ModelInner::Gbt { loss_curve, .. } => Some(loss_curve),
            _ => None,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn knn_predict(train_rows: &[Vec<f64>], train_y: &[f64], row: &[f64], k: usize) -> f64 {
    let mut dists: Vec<(f64, usize)> = train_rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d: f64 = r
                .iter()
                .zip(row.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1)));
    let k = k.min(dists.len());
    let sum: f64 = dists[..k].iter().map(|&(_, i)| train_y[i]).sum();
    sum / k as f64
}

/// Fits a learner. Classification requires both classes present.
pub fn fit(spec: &LearnerSpec, x: &FeatureMatrix, y: &LabelVector) -> Result<FitModel, LearnError> {
    spec.check()?;
    if x.n_rows() == 0 || y.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    assert_eq!(x.n_rows(), y.len(), "labels align with rows");
    if spec.task == Task::Classification {
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(LearnError::SingleClass);
        }
    }

    let inner = match spec.kind {
        LearnerKind::Logistic => {
            let (weights, bias) = logistic::fit_logistic(x, y, spec.l2, spec.tol, spec.max_iter);
            ModelInner::Logistic { weights, bias }
        }
        LearnerKind::Gbt => fit_gbt(spec, x, y),
        LearnerKind::Tree => fit_single_tree(spec, x, y),
        LearnerKind::Linear => {
            let (weights, bias) = fit_linear(x, y);
            ModelInner::Linear { weights, bias }
        }
        LearnerKind::Knn => ModelInner::Knn {
            train_rows: (0..x.n_rows()).map(|i| x.row(i).to_vec()).collect(),
            train_y: y.clone(),
        },
    };
    Ok(FitModel {
        spec: spec.clone(),
        feature_names: x.names().to_vec(),
        provenance: x.provenance().to_vec(),
        inner,
    })
}

fn gather_columns(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..x.n_features()).map(|j| x.column(j)).collect()
}

fn fit_gbt(spec: &LearnerSpec, x: &FeatureMatrix, y: &LabelVector) -> ModelInner {
    let n = x.n_rows();
    let columns = gather_columns(x);
    let sorted = SortedIndex::build(&columns);
    let params = TreeParams {
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        lambda: spec.tree_l2,
    };

    let base = match spec.task {
        Task::Classification => {
            let p = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        Task::Regression => y.iter().sum::<f64>() / n as f64,
    };
    let mut scores = vec![base; n];
    let mut trees = Vec::with_capacity(spec.rounds);
    let mut gains = vec![0.0; x.n_features()];
    let mut loss_curve = Vec::with_capacity(spec.rounds);

    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _round in 0..spec.rounds {
        match spec.task {
            Task::Classification => {
                for i in 0..n {
                    let p = sigmoid(scores[i]);
                    g[i] = p - y[i];
                    h[i] = (p * (1.0 - p)).max(1e-16);
                }
            }
            Task::Regression => {
                for i in 0..n {
                    g[i] = scores[i] - y[i];
                    h[i] = 1.0;
                }
            }
        }
        let (tree, tree_gains) = build_tree(&columns, &sorted, &g, &h, &params);
        for i in 0..n {
            // per-row prediction via the column store
            let mut row = Vec::with_capacity(columns.len());
            for col in &columns {
                row.push(col[i]);
            }
            scores[i] += spec.learning_rate * tree.predict_row(&row);
        }
        for (acc, v) in gains.iter_mut().zip(tree_gains.iter()) {
            *acc += v;
        }
        let loss = match spec.task {
            Task::Classification => {
                -(0..n)
                    .map(|i| {
                        let p = sigmoid(scores[i]).clamp(1e-12, 1.0 - 1e-12);
                        y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln()
                    })
                    .sum::<f64>()
                    / n as f64
            }
            Task::Regression => {
                (0..n).map(|i| (scores[i] - y[i]).powi(2)).sum::<f64>() / n as f64
            }
        };
        loss_curve.push(loss);
        trees.push(tree);
    }
    ModelInner::Gbt {
        base,
        trees,
        gains,
        loss_curve,
    }
}

fn fit_single_tree(spec: &LearnerSpec, x: &FeatureMatrix, y: &LabelVector) -> ModelInner {
    let columns = gather_columns(x);
    let sorted = SortedIndex::build(&columns);
    // squared loss from a zero prediction fits the tree directly to y
    let g: Vec<f64> = y.iter().map(|v| -v).collect();
    let h = vec![1.0; y.len()];
    let params = TreeParams {
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        lambda: 0.0,
    };
    let (tree, gains) = build_tree(&columns, &sorted, &g, &h, &params);
    ModelInner::Tree { tree, gains }
}

/// Ordinary least squares via normal equations with a small ridge for
/// numerical stability; intercept unpenalized in effect because the
/// ridge is negligible.
fn fit_linear(x: &FeatureMatrix, y: &LabelVector) -> (Vec<f64>, f64) {
    let n = x.n_rows();
    let d = x.n_features() + 1; // + intercept
    let mut ata = vec![0.0; d * d];
    let mut atb = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let va = if a < row.len() { row[a] } else { 1.0 };
            atb[a] += va * y[i];
            for b in a..d {
                let vb = if b < row.len() { row[b] } else { 1.0 };
                ata[a * d + b] += va * vb;
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            ata[a * d + b] = ata[b * d + a];
        }
        ata[a * d + a] += 1e-8;
    }
    let w = cholesky_solve(&mut ata, &mut atb, d);
    let bias = w[d - 1];
    (w[..d - 1].to_vec(), bias)
}

/// Solves A x = b in place for symmetric positive-definite A.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], d: usize) -> Vec<f64> {
    // decompose A = L L^T
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                a[i * d + j] = s.max(1e-12).sqrt();
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    // forward solve L z = b
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * d + k] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    // back solve L^T x = z
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= a[k * d + i] * b[k];
        }
        b[i] = s / a[i * d + i];
    }
    b.to_vec()
}

/// Ranked feature importances: |standardized coefficient| for logistic
/// and linear models, total split-gain for tree models. Weights are
/// normalized to sum to 1 when any are nonzero; ties break by feature
/// name.
pub fn feature_importance(model: &FitModel) -> Result<Vec<ImportanceEntry>, LearnError> {
    let raw: Vec<f64> = match &model.inner {
        ModelInner::Logistic { weights, .. } | ModelInner::Linear { weights, .. } => {
            weights.iter().map(|w| w.abs()).collect()
        }
        ModelInner::Gbt { gains, .. } | ModelInner::Tree { gains, .. } => gains.clone(),
        ModelInner::Knn { .. } => {
            return Err(LearnError::UnsupportedImportance(LearnerKind::Knn))
        }
    };
    let total: f64 = raw.iter().sum();
    let tree_like = matches!(
        model.inner,
        ModelInner::Gbt { .. } | ModelInner::Tree { .. }
    );
    let mut entries: Vec<ImportanceEntry> = raw
        .iter()
        .enumerate()
        .filter(|(_, &w)| !(tree_like && w == 0.0))
        .map(|(j, &w)| ImportanceEntry {
            feature: model.feature_names[j].clone(),
            weight: if total > 0.0 { w / total } else { 0.0 },
            provenance: model.provenance[j],
        })
        .collect();
    entries.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .expect("finite weights")
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(entries)
}

/// Partial dependence of the model probability on one feature: for each
/// grid value, the mean prediction over `x` with that feature
/// overwritten.
pub fn partial_dependence(
    model: &FitModel,
    x: &FeatureMatrix,
    feature: &str,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, LearnError> {
    let fi = x
        .feature_index(feature)
        .ok_or_else(|| LearnError::UnknownFeature(feature.to_string()))?;
    let mut out = Vec::with_capacity(grid.len());
    let mut scratch = vec![0.0; x.n_features()];
    for &gval in grid {
        let mut acc = 0.0;
        for i in 0..x.n_rows() {
            scratch.copy_from_slice(x.row(i));
            scratch[fi] = gval;
            acc += model.predict_row(&scratch);
        }
        out.push((gval, acc / x.n_rows() as f64));
    }
    Ok(out)
}
