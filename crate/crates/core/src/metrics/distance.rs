use indexmap::IndexMap;

use super::MetricError;
use crate::data::Table;
use crate::learn::preprocess_pair;

/// Distance over empirical category frequencies. All three are
/// symmetric, zero on identical inputs, one on disjoint supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    TotalVariation,
    Hellinger,
    JensenShannon,
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::TotalVariation => "total_variation",
            DistanceKind::Hellinger => "hellinger",
            DistanceKind::JensenShannon => "jensen_shannon",
        }
    }
}

/// Distance between the empirical frequency vectors of two categorical
/// samples over the union of observed categories. Numeric inputs are
/// pre-binned with [`bin_numeric_pair`].
pub fn categorical_distance(
    kind: DistanceKind,
    a: &[&str],
    b: &[&str],
) -> Result<f64, MetricError> {
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
    let n = a.len() as f64;
    let m = b.len() as f64;
    let value = match kind {
        DistanceKind::TotalVariation => {
            0.5 * counts
                .values()
                .map(|&(ca, cb)| (ca / n - cb / m).abs())
                .sum::<f64>()
        }
        DistanceKind::Hellinger => {
            let sq: f64 = counts
                .values()
                .map(|&(ca, cb)| {
                    let d = (ca / n).sqrt() - (cb / m).sqrt();
                    d * d
                })
                .sum();
            (sq / 2.0).sqrt()
        }
        DistanceKind::JensenShannon => {
            // JS divergence with base-2 logs is bounded by 1; the
            // distance is its square root.
            let mut div = 0.0;
            for &(ca, cb) in counts.values() {
                let p = ca / n;
                let q = cb / m;
                let mid = 0.5 * (p + q);
                if p > 0.0 {
                    div += 0.5 * p * (p / mid).log2();
                }
                if q > 0.0 {
                    div += 0.5 * q * (q / mid).log2();
                }
            }
            div.max(0.0).sqrt()
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Discretizes two numeric samples into `bins` equal-width bins over the
/// combined min–max range, yielding category labels for the distance
/// metrics. A degenerate range puts everything in one bin.
pub fn bin_numeric_pair(a: &[f64], b: &[f64], bins: usize) -> (Vec<String>, Vec<String>) {
    let lo = a
        .iter()
        .chain(b.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = a
        .iter()
        .chain(b.iter())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let assign = |x: f64| -> String {
        if width <= 0.0 {
            return "bin0".to_string();
        }
        let raw = ((x - lo) / width) as usize;
        format!("bin{}", raw.min(bins - 1))
    };
    (
        a.iter().map(|&x| assign(x)).collect(),
        b.iter().map(|&x| assign(x)).collect(),
    )
}

/// 1-D earth-mover distance: the integral of |ECDF_a − ECDF_b| over the
/// merged support. For equal sizes this equals the mean absolute
/// difference of the sorted samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
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

    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    for w in points.windows(2) {
        let (t, next) = (w[0], w[1]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        total += (i as f64 / n - j as f64 / m).abs() * (next - t);
    }
    Ok(total)
}

/// Maximum mean discrepancy between two tables sharing a schema.
///
/// Both tables are encoded with a shared label-blind feature encoding,
/// then compared with an RBF kernel whose bandwidth is the median
/// pairwise distance on the pooled sample (median heuristic). Returns
/// sqrt(max(MMD², 0)) of the biased V-statistic.
pub fn mmd(table_a: &Table, table_b: &Table) -> Result<f64, MetricError> {
    if table_a.row_count() == 0 || table_b.row_count() == 0 {
        return Err(MetricError::EmptySample);
    }
    let (features, _labels) = preprocess_pair(table_a, table_b)
        .map_err(|e| MetricError::InvalidSpec(e.to_string()))?;
    let rows: Vec<Vec<f64>> = (0..features.n_rows())
        .map(|i| features.row(i).to_vec())
        .collect();
    let (xa, xb) = rows.split_at(table_a.row_count());
    Ok(mmd_from_rows(xa, xb))
}

/// MMD on already-encoded feature rows. Exposed for oracle tests.
pub fn mmd_from_rows(xa: &[Vec<f64>], xb: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = xa.iter().chain(xb.iter()).collect();
    let mut dists = Vec::new();
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            dists.push(euclid(pooled[i], pooled[j]));
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    dists.sort_by(|u, v| u.partial_cmp(v).expect("finite distances"));
    let sigma = median_sorted(&dists);
    if sigma <= 0.0 {
        // all pooled points identical; the two samples cannot differ
        return 0.0;
    }
    let k = |x: &[f64], y: &[f64]| (-sq_euclid(x, y) / (2.0 * sigma * sigma)).exp();

    let n = xa.len() as f64;
    let m = xb.len() as f64;
    let mut kaa = 0.0;
    for x in xa {
        for y in xa {
            kaa += k(x, y);
        }
    }
    let mut kbb = 0.0;
    for x in xb {
        for y in xb {
            kbb += k(x, y);
        }
    }
    let mut kab = 0.0;
    for x in xa {
        for y in xb {
            kab += k(x, y);
        }
    }
    let mmd2 = kaa / (n * n) + kbb / (m * m) - 2.0 * kab / (n * m);
    mmd2.max(0.0).sqrt()
}

fn sq_euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    sq_euclid(x, y).sqrt()
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let l = sorted.len();
    if l % 2 == 1 {
        sorted[l / 2]
    } else {
        0.5 * (sorted[l / 2 - 1] + sorted[l / 2])
    }
}

/// Pairwise correlation difference: the Frobenius norm of the
/// difference between the two tables' Pearson correlation matrices over
/// the shared numeric (incl. datetime) columns. Null rows are dropped
/// pairwise; a constant column gets correlation 0 and a note.
pub fn pcd(table_a: &Table, table_b: &Table) -> Result<(f64, Vec<String>), MetricError> {
    let numeric: Vec<&str> = table_a
        .meta()
        .attribute_columns()
        .iter()
        .filter(|c| c.sem_type.is_numeric_like())
        .map(|c| c.name.as_str())
        .filter(|name| table_b.column(name).is_some())
        .collect();
    if numeric.len() < 2 {
        return Err(MetricError::TooFewNumericColumns);
    }
    let mut notes = Vec::new();
    let ca = correlation_matrix(table_a, &numeric, &mut notes)?;
    let cb = correlation_matrix(table_b, &numeric, &mut notes)?;
    let mut sq = 0.0;
    for i in 0..numeric.len() {
        for j in 0..numeric.len() {
            let d = ca[i][j] - cb[i][j];
            sq += d * d;
        }
    }
    Ok((sq.sqrt(), notes))
}

fn correlation_matrix(
    table: &Table,
    columns: &[&str],
    notes: &mut Vec<String>,
) -> Result<Vec<Vec<f64>>, MetricError> {
    let k = columns.len();
    let mut corr = vec![vec![0.0; k]; k];
    for i in 0..k {
        corr[i][i] = 1.0;
        for j in (i + 1)..k {
            let xi = table.column(columns[i]).expect("shared column");
            let xj = table.column(columns[j]).expect("shared column");
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in 0..table.row_count() {
                if let (Some(a), Some(b)) = (xi.numeric_at(r), xj.numeric_at(r)) {
                    xs.push(a);
                    ys.push(b);
                }
            }
            let c = match pearson(&xs, &ys) {
                Some(c) => c,
                None => {
                    notes.push(format!(
                        "{}: correlation({}, {}) degenerate; set to 0",
                        table.name(),
                        columns[i],
                        columns[j]
                    ));
                    0.0
                }
            };
            corr[i][j] = c;
            corr[j][i] = c;
        }
    }
    Ok(corr)
}

/// Pearson correlation; `None` when fewer than 2 points or either side
/// is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distances_zero_on_identical() {
        let a = ["x", "y", "x", "z"];
        for kind in [
            DistanceKind::TotalVariation,
            DistanceKind::Hellinger,
            DistanceKind::JensenShannon,
        ] {
            assert_relative_eq!(
                categorical_distance(kind, &a, &a).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn distances_one_on_disjoint() {
        let a = ["x", "x", "y"];
        let b = ["u", "v", "v"];
        for kind in [
            DistanceKind::TotalVariation,
            DistanceKind::Hellinger,
            DistanceKind::JensenShannon,
        ] {
            assert_relative_eq!(
                categorical_distance(kind, &a, &b).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn tv_direct_formula_case() {
        // Oracle: p=(0.5,0.5), q=(0.75,0.25) -> TV = 0.25.
        let a = ["h", "t", "h", "t"];
        let b = ["h", "h", "h", "t"];
        assert_relative_eq!(
            categorical_distance(DistanceKind::TotalVariation, &a, &b).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn binning_respects_combined_range() {
        let a = vec![0.0, 1.0, 2.0];
        let b = vec![8.0, 10.0];
        let (ba, bb) = bin_numeric_pair(&a, &b, 5);
        assert_eq!(ba, vec!["bin0", "bin0", "bin1"]);
        assert_eq!(bb, vec!["bin4", "bin4"]);
        let (ca, _) = bin_numeric_pair(&[3.0, 3.0], &[3.0], 50);
        assert_eq!(ca, vec!["bin0", "bin0"]);
    }

    #[test]
    fn wasserstein_identical_and_shift() {
        let a = vec![0.3, 1.9, 2.2, 7.0];
        assert_relative_eq!(wasserstein1(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
        let b: Vec<f64> = a.iter().map(|x| x + 2.5).collect();
        assert_relative_eq!(wasserstein1(&a, &b).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn wasserstein_sorted_pairing_case() {
        // Oracle: sorted-pairing formula gives (|0-1| + |1-3|)/2 = 1.5.
        let a = vec![0.0, 1.0];
        let b = vec![1.0, 3.0];
        assert_relative_eq!(wasserstein1(&a, &b).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn mmd_identical_rows_zero() {
        let xa = vec![vec![0.0, 1.0], vec![2.0, 0.5], vec![1.0, 1.0]];
        assert_relative_eq!(mmd_from_rows(&xa, &xa), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mmd_matches_explicit_kernel_sums() {
        // Oracle: explicit quadratic-form evaluation for 1-D three-point
        // sets {0} repeated and {10} repeated.
        let xa = vec![vec![0.0], vec![0.0], vec![0.0]];
        let xb = vec![vec![10.0], vec![10.0], vec![10.0]];
        // pairwise pooled distances: within groups 0 (6 pairs), across 10
        // (9 pairs); sorted median of 15 values = 8th value = 10.
        let sigma: f64 = 10.0;
        let k_cross = (-100.0 / (2.0 * sigma * sigma)).exp();
        let expected = (1.0 + 1.0 - 2.0 * k_cross).sqrt();
        assert_relative_eq!(mmd_from_rows(&xa, &xb), expected, epsilon = 1e-9);
    }

    #[test]
    fn mmd_degenerate_bandwidth_is_zero() {
        let xa = vec![vec![1.0], vec![1.0]];
        let xb = vec![vec![1.0], vec![1.0], vec![1.0]];
        assert_eq!(mmd_from_rows(&xa, &xb), 0.0);
    }

    #[test]
    fn pearson_handles_constant_input() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        let c = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }
}
