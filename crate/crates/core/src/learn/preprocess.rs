use std::collections::HashMap;

use crate::aggregate::{AggregatedTable, Provenance};
use crate::data::{SemType, Table};

use super::LearnError;

/// Reserved labels for pooled and missing categories. The bracket
/// characters cannot collide with data-driven category names produced by
/// the encoders.
pub const OTHER_CATEGORY: &str = "\u{27c2}other";
pub const MISSING_CATEGORY: &str = "\u{27c2}missing";

/// Cap on indicator columns per categorical feature; the remainder is
/// pooled into [`OTHER_CATEGORY`].
pub const CATEGORY_CAP: usize = 20;

const SD_GUARD: f64 = 1e-12;

/// Dense room-for-learning representation: rows × named features, plus
/// per-feature provenance (original column vs relational aggregate).
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    names: Vec<String>,
    provenance: Vec<Provenance>,
    data: Vec<f64>,
    n_rows: usize,
    notes: Vec<String>,
}

impl FeatureMatrix {
    fn new(
        names: Vec<String>,
        provenance: Vec<Provenance>,
        data: Vec<f64>,
        n_rows: usize,
        notes: Vec<String>,
    ) -> FeatureMatrix {
        debug_assert_eq!(names.len(), provenance.len());
        debug_assert_eq!(data.len(), names.len() * n_rows);
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite feature");
        FeatureMatrix {
            names,
            provenance,
            data,
            n_rows,
            notes,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.data[i * w..(i + 1) * w]
    }

    /// Column `j` gathered into a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i)[j]).collect()
    }

    /// Rows `idx` as a new matrix (order preserved, duplicates allowed).
    pub fn subset_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let w = self.n_features();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            provenance: self.provenance.clone(),
            data,
            n_rows: idx.len(),
            notes: self.notes.clone(),
        }
    }

    /// Content hash of row `i`, for order-independent fold seeding.
    pub fn row_content_hash(&self, i: usize) -> u64 {
        let mut h = crate::seed::ContentHasher::new();
        for &v in self.row(i) {
            h.update_f64(v);
        }
        h.finish()
    }

    /// Builds a matrix directly from rows; used by oracles and utility.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> FeatureMatrix {
        let n_rows = rows.len();
        let provenance = vec![Provenance::Original; names.len()];
        let mut data = Vec::with_capacity(n_rows * names.len());
        for r in rows {
            assert_eq!(r.len(), names.len());
            data.extend_from_slice(r);
        }
        FeatureMatrix::new(names, provenance, data, n_rows, Vec::new())
    }
}

/// Binary labels (1 = real, 0 = synthetic) or regression targets.
pub type LabelVector = Vec<f64>;

enum FeaturePlan {
    Numeric {
        column: String,
        provenance: Provenance,
        mean: f64,
        sd: Option<f64>,
        missing_indicator: bool,
    },
    Categorical {
        column: String,
        provenance: Provenance,
        categories: Vec<String>,
        has_other: bool,
        has_missing: bool,
    },
}

/// Feature encoding fitted on one or more tables of the same schema.
/// Fitting never reads labels, so the encoding cannot leak them.
pub struct Encoder {
    plans: Vec<FeaturePlan>,
    notes: Vec<String>,
}

impl Encoder {
    /// Fits the encoding on the union of the given tables: categorical
    /// columns become indicators over observed categories (top
    /// [`CATEGORY_CAP`] by combined frequency, remainder pooled),
    /// booleans map to {0,1}, numeric and datetime columns standardize
    /// with the combined mean/sd, and nulls turn into a mean impute plus
    /// a missing-indicator feature. Key columns are excluded.
    ///
    /// `always_other` reserves the pooled-category bucket even when no
    /// category overflows the cap, which lets the encoding absorb unseen
    /// categories when it is applied to new tables.
    pub fn fit(tables: &[&AggregatedTable], always_other: bool) -> Encoder {
        let mut plans = Vec::new();
        let mut notes = Vec::new();
        let reference = tables[0];
        for decl in reference.table.meta().attribute_columns() {
            let provenance = reference
                .provenance_of(&decl.name)
                .unwrap_or(Provenance::Original);
            match decl.sem_type {
                SemType::Id => {}
                SemType::Categorical => {
                    let mut counts: HashMap<String, usize> = HashMap::new();
                    let mut missing = false;
                    for t in tables {
                        if let Some(col) = t.table.column(&decl.name) {
                            for i in 0..col.len() {
                                match col.category_at(i) {
                                    Some(v) => *counts.entry(v).or_insert(0) += 1,
                                    None => missing = true,
                                }
                            }
                        }
                    }
                    let mut by_freq: Vec<(String, usize)> = counts.into_iter().collect();
                    // ties broken by label so the plan is deterministic
                    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    let capped = by_freq.len() > CATEGORY_CAP;
                    if capped {
                        notes.push(format!(
                            "column {} has {} categories; keeping top {CATEGORY_CAP}, pooling rest",
                            decl.name,
                            by_freq.len()
                        ));
                        by_freq.truncate(CATEGORY_CAP);
                    }
                    let categories = by_freq.into_iter().map(|(c, _)| c).collect();
                    plans.push(FeaturePlan::Categorical {
                        column: decl.name.clone(),
                        provenance,
                        categories,
                        has_other: capped || always_other,
                        has_missing: missing,
                    });
                }
                SemType::Numerical | SemType::Datetime | SemType::Boolean => {
                    let standardize = decl.sem_type != SemType::Boolean;
                    let mut values = Vec::new();
                    let mut missing = false;
                    for t in tables {
                        if let Some(col) = t.table.column(&decl.name) {
                            for i in 0..col.len() {
                                match col.numeric_at(i) {
                                    Some(v) => values.push(v),
                                    None => missing = true,
                                }
                            }
                        }
                    }
                    let mean = if values.is_empty() {
                        0.0
                    } else {
                        values.iter().sum::<f64>() / values.len() as f64
                    };
                    let sd = if standardize {
                        let var = if values.is_empty() {
                            0.0
                        } else {
                            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                                / values.len() as f64
                        };
                        Some(var.sqrt())
                    } else {
                        None
                    };
                    plans.push(FeaturePlan::Numeric {
                        column: decl.name.clone(),
                        provenance,
                        mean,
                        sd,
                        missing_indicator: missing,
                    });
                }
            }
        }
        Encoder { plans, notes }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for plan in &self.plans {
            match plan {
                FeaturePlan::Numeric {
                    column,
                    missing_indicator,
                    ..
                } => {
                    names.push(column.clone());
                    if *missing_indicator {
                        names.push(format!("{column}__missing"));
                    }
                }
                FeaturePlan::Categorical {
                    column,
                    categories,
                    has_other,
                    has_missing,
                    ..
                } => {
                    for c in categories {
                        names.push(format!("{column}={c}"));
                    }
                    if *has_other {
                        names.push(format!("{column}={OTHER_CATEGORY}"));
                    }
                    if *has_missing {
                        names.push(format!("{column}={MISSING_CATEGORY}"));
                    }
                }
            }
        }
        names
    }

    fn feature_provenance(&self) -> Vec<Provenance> {
        let mut provs = Vec::new();
        for plan in &self.plans {
            match plan {
                FeaturePlan::Numeric {
                    provenance,
                    missing_indicator,
                    ..
                } => {
                    provs.push(*provenance);
                    if *missing_indicator {
                        provs.push(*provenance);
                    }
                }
                FeaturePlan::Categorical {
                    provenance,
                    categories,
                    has_other,
                    has_missing,
                    ..
                } => {
                    provs.extend(std::iter::repeat(*provenance).take(
                        categories.len() + *has_other as usize + *has_missing as usize,
                    ));
                }
            }
        }
        provs
    }

    /// Encodes one table with the fitted plan.
    pub fn transform(&self, table: &Table) -> Result<FeatureMatrix, LearnError> {
        let names = self.feature_names();
        let width = names.len();
        let n = table.row_count();
        let mut data = vec![0.0; n * width];
        let mut j = 0usize;
        for plan in &self.plans {
            match plan {
                FeaturePlan::Numeric {
                    column,
                    mean,
                    sd,
                    missing_indicator,
                    ..
                } => {
                    let col = table
                        .column(column)
                        .ok_or_else(|| LearnError::ColumnMismatch(column.clone()))?;
                    for i in 0..n {
                        let (value, miss) = match col.numeric_at(i) {
                            Some(v) => (v, 0.0),
                            None => (*mean, 1.0),
                        };
                        data[i * width + j] = match sd {
                            Some(sd) if *sd < SD_GUARD => 0.0,
                            Some(sd) => (value - mean) / sd,
                            None => value,
                        };
                        if *missing_indicator {
                            data[i * width + j + 1] = miss;
                        }
                    }
                    j += 1 + *missing_indicator as usize;
                }
                FeaturePlan::Categorical {
                    column,
                    categories,
                    has_other,
                    has_missing,
                    ..
                } => {
                    let col = table
                        .column(column)
                        .ok_or_else(|| LearnError::ColumnMismatch(column.clone()))?;
                    let slot: HashMap<&str, usize> = categories
                        .iter()
                        .enumerate()
                        .map(|(s, c)| (c.as_str(), s))
                        .collect();
                    let other_slot = categories.len();
                    let missing_slot = categories.len() + *has_other as usize;
                    for i in 0..n {
                        match col.category_at(i) {
                            Some(v) => match slot.get(v.as_str()) {
                                Some(&s) => data[i * width + j + s] = 1.0,
                                None if *has_other => data[i * width + j + other_slot] = 1.0,
                                None => {}
                            },
                            None if *has_missing => data[i * width + j + missing_slot] = 1.0,
                            None => {}
                        }
                    }
                    j += categories.len() + *has_other as usize + *has_missing as usize;
                }
            }
        }
        Ok(FeatureMatrix::new(
            names,
            self.feature_provenance(),
            data,
            n,
            self.notes.clone(),
        ))
    }
}

/// Stacks a real/synthetic table pair into one feature matrix with a
/// shared encoding and labels 1 for real rows, 0 for synthetic rows.
pub fn preprocess(
    real: &AggregatedTable,
    syn: &AggregatedTable,
) -> Result<(FeatureMatrix, LabelVector), LearnError> {
    if real.table.row_count() == 0 || syn.table.row_count() == 0 {
        return Err(LearnError::EmptyInput);
    }
    let real_cols: Vec<_> = real
        .table
        .meta()
        .attribute_columns()
        .iter()
        .map(|c| (c.name.clone(), c.sem_type))
        .collect();
    let syn_cols: Vec<_> = syn
        .table
        .meta()
        .attribute_columns()
        .iter()
        .map(|c| (c.name.clone(), c.sem_type))
        .collect();
    if real_cols != syn_cols {
        return Err(LearnError::ColumnMismatch(format!(
            "column sets differ: {real_cols:?} vs {syn_cols:?}"
        )));
    }

    let encoder = Encoder::fit(&[real, syn], false);
    let fm_real = encoder.transform(&real.table)?;
    let fm_syn = encoder.transform(&syn.table)?;

    let n = fm_real.n_rows();
    let m = fm_syn.n_rows();
    let width = fm_real.n_features();
    let mut data = Vec::with_capacity((n + m) * width);
    for i in 0..n {
        data.extend_from_slice(fm_real.row(i));
    }
    for i in 0..m {
        data.extend_from_slice(fm_syn.row(i));
    }
    let mut labels = vec![1.0; n];
    labels.extend(vec![0.0; m]);
    let mut notes = fm_real.notes().to_vec();
    notes.dedup();
    Ok((
        FeatureMatrix::new(
            fm_real.names().to_vec(),
            fm_real.provenance().to_vec(),
            data,
            n + m,
            notes,
        ),
        labels,
    ))
}

/// [`preprocess`] for plain tables (all columns original).
pub fn preprocess_pair(
    real: &Table,
    syn: &Table,
) -> Result<(FeatureMatrix, LabelVector), LearnError> {
    preprocess(
        &AggregatedTable::from_original(real),
        &AggregatedTable::from_original(syn),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnMeta, TableMeta};
    use indexmap::IndexMap;

    fn table(values: Vec<Option<&str>>, nums: Vec<Option<f64>>) -> Table {
        let meta = TableMeta {
            name: "t".into(),
            primary_key: None,
            foreign_keys: vec![],
            columns: vec![
                ColumnMeta {
                    name: "cat".into(),
                    sem_type: SemType::Categorical,
                    datetime_format: None,
                },
                ColumnMeta {
                    name: "x".into(),
                    sem_type: SemType::Numerical,
                    datetime_format: None,
                },
            ],
        };
        let mut columns = IndexMap::new();
        columns.insert(
            "cat".to_string(),
            Column::Categorical(values.into_iter().map(|v| v.map(String::from)).collect()),
        );
        columns.insert("x".to_string(), Column::Numerical(nums));
        Table::new(meta, columns).unwrap()
    }

    #[test]
    fn two_level_categorical_gives_two_indicators() {
        let real = table(vec![Some("a"), Some("b")], vec![Some(1.0), Some(2.0)]);
        let syn = table(vec![Some("a"), Some("a")], vec![Some(1.5), Some(2.5)]);
        let (fm, y) = preprocess_pair(&real, &syn).unwrap();
        // categories a, b plus the numeric column; no missing indicators
        assert_eq!(fm.n_features(), 3);
        assert!(fm.names().contains(&"cat=a".to_string()));
        assert!(fm.names().contains(&"cat=b".to_string()));
        assert_eq!(y, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_indicator_appears_iff_nulls_exist() {
        let real = table(vec![Some("a"), None], vec![Some(1.0), None]);
        let syn = table(vec![Some("b"), Some("a")], vec![Some(2.0), Some(3.0)]);
        let (fm, _) = preprocess_pair(&real, &syn).unwrap();
        assert!(fm
            .names()
            .contains(&format!("cat={MISSING_CATEGORY}")));
        assert!(fm.names().contains(&"x__missing".to_string()));
    }

    #[test]
    fn constant_numeric_standardizes_to_zero() {
        let real = table(vec![Some("a"), Some("a")], vec![Some(5.0), Some(5.0)]);
        let syn = table(vec![Some("a"), Some("a")], vec![Some(5.0), Some(5.0)]);
        let (fm, _) = preprocess_pair(&real, &syn).unwrap();
        let xi = fm.feature_index("x").unwrap();
        for i in 0..fm.n_rows() {
            assert_eq!(fm.row(i)[xi], 0.0);
        }
    }

    #[test]
    fn labels_stack_real_then_synthetic() {
        let real = table(
            vec![Some("a"), Some("a"), Some("b")],
            vec![Some(1.0), Some(2.0), Some(3.0)],
        );
        let syn = table(vec![Some("a"), Some("b")], vec![Some(1.0), Some(2.0)]);
        let (_, y) = preprocess_pair(&real, &syn).unwrap();
        assert_eq!(y, vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn column_mismatch_is_an_error() {
        let real = table(vec![Some("a")], vec![Some(1.0)]);
        let meta = TableMeta {
            name: "t".into(),
            primary_key: None,
            foreign_keys: vec![],
            columns: vec![ColumnMeta {
                name: "other".into(),
                sem_type: SemType::Numerical,
                datetime_format: None,
            }],
        };
        let mut columns = IndexMap::new();
        columns.insert("other".to_string(), Column::Numerical(vec![Some(1.0)]));
        let syn = Table::new(meta, columns).unwrap();
        assert!(matches!(
            preprocess_pair(&real, &syn),
            Err(LearnError::ColumnMismatch(_))
        ));
    }

    #[test]
    fn category_cap_pools_rare_levels_and_notes_it() {
        let levels: Vec<String> = (0..30).map(|i| format!("lvl{i:02}")).collect();
        let cells: Vec<Option<&str>> = levels.iter().map(|s| Some(s.as_str())).collect();
        let nums: Vec<Option<f64>> = (0..30).map(|i| Some(i as f64)).collect();
        let real = table(cells.clone(), nums.clone());
        let syn = table(cells, nums);
        let (fm, _) = preprocess_pair(&real, &syn).unwrap();
        assert!(fm
            .names()
            .contains(&format!("cat={OTHER_CATEGORY}")));
        let indicator_count = fm.names().iter().filter(|n| n.starts_with("cat=")).count();
        assert_eq!(indicator_count, CATEGORY_CAP + 1);
        assert!(!fm.notes().is_empty());
    }
}
