use indexmap::IndexMap;

use super::special::{chi2_sf, kolmogorov_survival};
use super::{Granularity, MetricError, MetricResult};
use crate::aggregate::child_row_counts;
use crate::data::{Database, Relationship};

/// Two-sample Kolmogorov-Smirnov test.
///
/// Returns the statistic D = sup |ECDF_a − ECDF_b| and a p-value from
/// the asymptotic Kolmogorov distribution evaluated at
/// D·sqrt(nm/(n+m)). Callers strip nulls first.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64), MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("finite values"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("finite values"));
    let mut points = xs.clone();
    points.extend_from_slice(&ys);
    points.sort_by(|u, v| u.partial_cmp(v).expect("finite values"));
    points.dedup();

    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    for &t in &points {
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if diff > d {
            d = diff;
        }
    }

    let effective = (n as f64 * m as f64) / (n as f64 + m as f64);
    let p = kolmogorov_survival(d * effective.sqrt());
    Ok((d, p))
}

/// Flags the sample sizes where the asymptotic KS p-value is rough.
pub fn ks_small_sample_note(n: usize, m: usize) -> Option<String> {
    if n.min(m) < 25 {
        Some(format!(
            "asymptotic KS p-value is approximate for min(n, m) = {} < 25",
            n.min(m)
        ))
    } else {
        None
    }
}

/// Chi-squared homogeneity test over the 2×k contingency table of the
/// union of observed categories. df = k−1.
pub fn chi2_two_sample(a: &[&str], b: &[&str]) -> Result<(f64, f64), MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let mut counts: IndexMap<&str, (f64, f64)> = IndexMap::new();
    for &v in a {
        counts.entry(v).or_insert((0.0, 0.0)).0 += 1.0;
    }
    for &v in b {
        counts.entry(v).or_insert((0.0, 0.0)).1 += 1.0;
    }
    // Categories with zero combined count cannot arise from observed
    // samples; the union construction drops them before df by design.
    let k = counts.len();
    if k < 2 {
        return Err(MetricError::SingleCategory);
    }
    let n = a.len() as f64;
    let m = b.len() as f64;
    let total = n + m;
    let mut stat = 0.0;
    for (_, &(ca, cb)) in counts.iter() {
        let col = ca + cb;
        let ea = n * col / total;
        let eb = m * col / total;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let df = (k - 1) as f64;
    let p = chi2_sf(stat, df);
    Ok((stat, p))
}

/// Cardinality shape similarity: a KS test between the real and
/// synthetic distributions of child-row counts per parent row.
pub fn cardinality_shape_similarity(
    db_real: &Database,
    db_syn: &Database,
    relationship: &Relationship,
    alpha: f64,
) -> Result<MetricResult, MetricError> {
    let real_counts = child_row_counts(db_real, relationship)?;
    let syn_counts = child_row_counts(db_syn, relationship)?;
    let (d, p) = ks_two_sample(&real_counts, &syn_counts)?;
    let mut result = MetricResult::from_p_value(
        "cardinality_shape_similarity",
        Granularity::MultiTable,
        relationship.parent.clone(),
        Some(format!("{}<-{}", relationship.fk_column, relationship.child)),
        d,
        p,
        alpha,
    );
    if let Some(note) = ks_small_sample_note(real_counts.len(), syn_counts.len()) {
        result = result.with_note(note);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_identical_samples() {
        let a = vec![1.0, 2.0, 3.0];
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![5.0, 6.0, 7.0, 8.0];
        let (d, _) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(d, 1.0);
    }

    /// Independent oracle: evaluate |ECDF_a(t) − ECDF_b(t)| by counting
    /// at every point of the pooled sample.
    fn ecdf_sup_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0f64;
        for &t in a.iter().chain(b.iter()) {
            let fa = a.iter().filter(|&&x| x <= t).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&x| x <= t).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn ks_overlapping_case_matches_ecdf_oracle() {
        // Exhaustive ECDF evaluation at all 6 points: sup is 2/3 - 1/3.
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![2.0, 3.0, 4.0];
        let (d, _) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(d, ecdf_sup_oracle(&a, &b));
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let a = vec![0.3, 1.7, 2.2, 5.0, 0.1];
        let b = vec![0.5, 0.9, 3.3, 4.1];
        let (d1, _) = ks_two_sample(&a, &b).unwrap();
        let fa: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        let fb: Vec<f64> = b.iter().map(|x| x.exp()).collect();
        let (d2, _) = ks_two_sample(&fa, &fb).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn ks_rejects_empty() {
        assert!(matches!(
            ks_two_sample(&[], &[1.0]),
            Err(MetricError::EmptySample)
        ));
    }

    #[test]
    fn chi2_identical_counts() {
        let a = ["x", "x", "y"];
        let (stat, p) = chi2_two_sample(&a, &a).unwrap();
        assert_eq!(stat, 0.0);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chi2_disjoint_categories_matches_hand_computation() {
        // Oracle: 2x2 table with expected 5 per cell -> statistic 20.
        let a = vec!["A"; 10];
        let b = vec!["B"; 10];
        let (stat, p) = chi2_two_sample(&a, &b).unwrap();
        assert_relative_eq!(stat, 20.0, epsilon = 1e-9);
        assert_relative_eq!(p, 7.744216431044088e-06, max_relative = 1e-9);
    }

    #[test]
    fn chi2_single_category_is_an_error() {
        let a = vec!["A"; 5];
        let b = vec!["A"; 7];
        assert!(matches!(
            chi2_two_sample(&a, &b),
            Err(MetricError::SingleCategory)
        ));
    }

    #[test]
    fn chi2_invariant_under_relabeling() {
        let a = ["u", "u", "v", "w"];
        let b = ["v", "w", "w", "w"];
        let (s1, _) = chi2_two_sample(&a, &b).unwrap();
        let relabel = |s: &str| match s {
            "u" => "cat-9",
            "v" => "cat-7",
            _ => "cat-1",
        };
        let ra: Vec<&str> = a.iter().map(|s| relabel(s)).collect();
        let rb: Vec<&str> = b.iter().map(|s| relabel(s)).collect();
        let (s2, _) = chi2_two_sample(&ra, &rb).unwrap();
        assert_relative_eq!(s1, s2, epsilon = 1e-12);
    }
}
