//! Deterministic stratified k-fold cross-validation.
//!
//! Examples are first put into a canonical order keyed by their row
//! content hashes, so fold assignment — and therefore every downstream
//! result — does not depend on the order rows arrived in. The canonical
//! order also fixes the floating-point summation order inside the
//! learners, making detection runs bit-identical under row permutation.

use super::preprocess::{FeatureMatrix, LabelVector};
use super::{fit, LearnError, LearnerSpec, Task};
use crate::seed::{derive_seed, rng};
use rand::seq::SliceRandom;

/// Fold id per example. Folds partition the indices; per-fold class
/// proportions are within one example of the global proportions.
pub fn stratified_fold_assignment(
    y: &[f64],
    k: usize,
    seed: u64,
    canonical_keys: &[u64],
) -> Result<Vec<usize>, LearnError> {
    if k < 2 {
        return Err(LearnError::InvalidSpec(format!("fold count {k} < 2")));
    }
    let classes: Vec<f64> = {
        let mut c: Vec<f64> = y.to_vec();
        c.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
        c.dedup();
        c
    };
    let mut fold_of = vec![usize::MAX; y.len()];
    for (ci, class) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == *class).collect();
        if members.len() < k {
            return Err(LearnError::FoldCount {
                class_count: members.len(),
                k,
            });
        }
        // canonical order, then a seeded shuffle
        members.sort_by_key(|&i| (canonical_keys[i], i));
        let mut gen = rng(derive_seed(seed, ci as u64));
        members.shuffle(&mut gen);
        // contiguous chunks, sizes differing by at most one
        let base = members.len() / k;
        let extra = members.len() % k;
        let mut at = 0usize;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            for &i in &members[at..at + size] {
                fold_of[i] = fold;
            }
            at += size;
        }
    }
    Ok(fold_of)
}

/// Pooled out-of-fold predictions: 0–1 losses and model probabilities,
/// both aligned to the input rows.
pub fn stratified_kfold_predictions(
    spec: &LearnerSpec,
    x: &FeatureMatrix,
    y: &LabelVector,
    k: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
    assert_eq!(spec.task, Task::Classification, "CV losses are 0-1");
    let keys: Vec<u64> = (0..x.n_rows()).map(|i| x.row_content_hash(i)).collect();
    let fold_of = stratified_fold_assignment(y, k, seed, &keys)?;

    // canonical global order: sort by (key, index); training submatrices
    // are then independent of the arrival order of rows
    let mut canonical: Vec<usize> = (0..x.n_rows()).collect();
    canonical.sort_by_key(|&i| (keys[i], i));

    let mut losses = vec![0.0; x.n_rows()];
    let mut probs = vec![0.0; x.n_rows()];
    for fold in 0..k {
        let train_idx: Vec<usize> = canonical
            .iter()
            .copied()
            .filter(|&i| fold_of[i] != fold)
            .collect();
        let test_idx: Vec<usize> = canonical
            .iter()
            .copied()
            .filter(|&i| fold_of[i] == fold)
            .collect();
        let x_train = x.subset_rows(&train_idx);
        let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let model = fit(spec, &x_train, &y_train)?;
        for &i in &test_idx {
            let p = model.predict_row(x.row(i));
            probs[i] = p;
            let predicted = if p >= 0.5 { 1.0 } else { 0.0 };
            losses[i] = if predicted == y[i] { 0.0 } else { 1.0 };
        }
    }
    Ok((losses, probs))
}

/// Pooled out-of-fold 0–1 losses aligned to input rows.
pub fn stratified_kfold_losses(
    spec: &LearnerSpec,
    x: &FeatureMatrix,
    y: &LabelVector,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, LearnError> {
    stratified_kfold_predictions(spec, x, y, k, seed).map(|(losses, _)| losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_fold_exact_stratification() {
        let y = vec![1.0, 1.0, 0.0, 0.0];
        let keys = vec![10, 20, 30, 40];
        let folds = stratified_fold_assignment(&y, 2, 0, &keys).unwrap();
        // each fold holds one of each class
        for fold in 0..2 {
            let ones = (0..4).filter(|&i| folds[i] == fold && y[i] == 1.0).count();
            let zeros = (0..4).filter(|&i| folds[i] == fold && y[i] == 0.0).count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, 1);
        }
    }

    #[test]
    fn folds_partition_indices() {
        let y: Vec<f64> = (0..37).map(|i| (i % 2) as f64).collect();
        let keys: Vec<u64> = (0..37u64).map(|i| i.wrapping_mul(2654435761)).collect();
        let folds = stratified_fold_assignment(&y, 5, 9, &keys).unwrap();
        assert!(folds.iter().all(|&f| f < 5));
        // proportions within one example per fold
        for fold in 0..5 {
            let ones = (0..37).filter(|&i| folds[i] == fold && y[i] == 1.0).count();
            let zeros = (0..37).filter(|&i| folds[i] == fold && y[i] == 0.0).count();
            assert!((ones as i64 - zeros as i64).abs() <= 1, "{ones} vs {zeros}");
        }
    }

    #[test]
    fn class_smaller_than_k_is_an_error() {
        let y = vec![1.0, 0.0, 0.0, 0.0];
        let keys = vec![1, 2, 3, 4];
        assert!(matches!(
            stratified_fold_assignment(&y, 2, 0, &keys),
            Err(LearnError::FoldCount { class_count: 1, k: 2 })
        ));
    }

    #[test]
    fn separable_data_has_zero_losses() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 } + (i as f64) * 1e-4])
            .collect();
        let y: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let x = FeatureMatrix::from_rows(vec!["f".into()], &rows);
        let losses =
            stratified_kfold_losses(&LearnerSpec::logistic(), &x, &y, 5, 3).unwrap();
        assert!(losses.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn results_identical_under_row_permutation() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.77).sin(), (i as f64 * 0.31).cos()])
            .collect();
        let y: Vec<f64> = (0..30).map(|i| ((i / 3) % 2) as f64).collect();
        let x = FeatureMatrix::from_rows(vec!["a".into(), "b".into()], &rows);

        let perm: Vec<usize> = (0..30).map(|i| (i * 7) % 30).collect();
        let x_p = x.subset_rows(&perm);
        let y_p: Vec<f64> = perm.iter().map(|&i| y[i]).collect();

        let spec = LearnerSpec::gbt();
        let (l1, p1) = stratified_kfold_predictions(&spec, &x, &y, 3, 11).unwrap();
        let (l2, p2) = stratified_kfold_predictions(&spec, &x_p, &y_p, 3, 11).unwrap();
        // same multiset of (loss, prob) pairs, aligned through the permutation
        for (new_pos, &old_pos) in perm.iter().enumerate() {
            assert_eq!(l1[old_pos], l2[new_pos]);
            assert_eq!(p1[old_pos], p2[new_pos]);
        }
    }
}
