//! L2-regularized logistic regression fit by full-batch gradient
//! descent with a Lipschitz step size.
//!
//! Objective (mean scale): (1/n) Σ log-loss + (l2 / 2n) ‖w‖²; the bias
//! is unpenalized. The sum-scale strength `l2` matches the common
//! convention where strength 1.0 means one unit of penalty per dataset.

use super::preprocess::FeatureMatrix;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized mean log-loss at (w, b).
pub(crate) fn logistic_loss(
    x: &FeatureMatrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    l2: f64,
) -> f64 {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    for i in 0..x.n_rows() {
        let z: f64 = x.row(i).iter().zip(w.iter()).map(|(a, c)| a * c).sum::<f64>() + b;
        // numerically stable log(1 + exp(-y z)) with y in {0, 1}
        let margin = if y[i] == 1.0 { z } else { -z };
        loss += if margin > 0.0 {
            (-margin).exp().ln_1p()
        } else {
            -margin + margin.exp().ln_1p()
        };
    }
    let penalty: f64 = w.iter().map(|v| v * v).sum::<f64>() * l2 / 2.0;
    (loss + penalty) / n
}

/// Gradient of the objective at (w, b).
pub(crate) fn logistic_gradient(
    x: &FeatureMatrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = x.n_rows();
    let d = x.n_features();
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    for i in 0..n {
        let row = x.row(i);
        let z: f64 = row.iter().zip(w.iter()).map(|(a, c)| a * c).sum::<f64>() + b;
        let err = sigmoid(z) - y[i];
        for j in 0..d {
            gw[j] += err * row[j];
        }
        gb += err;
    }
    let nf = n as f64;
    for j in 0..d {
        gw[j] = (gw[j] + l2 * w[j]) / nf;
    }
    (gw, gb / nf)
}

/// Full-batch gradient descent to tolerance on the gradient norm.
pub(crate) fn fit_logistic(
    x: &FeatureMatrix,
    y: &[f64],
    l2: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x.n_rows();
    let d = x.n_features();
    let mut w = vec![0.0; d];
    let mut b = 0.0;

    // Lipschitz bound of the gradient: ||X||_F^2 / (4n) + l2/n, plus the
    // bias block's 1/4.
    let frob_sq: f64 = (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>()).sum();
    let lip = (frob_sq + n as f64) / (4.0 * n as f64) + l2 / n as f64;
    let step = 1.0 / lip.max(1e-12);

    for _ in 0..max_iter {
        let (gw, gb) = logistic_gradient(x, y, &w, b, l2);
        let gnorm = gw.iter().map(|v| v * v).sum::<f64>() + gb * gb;
        if gnorm.sqrt() <= tol {
            break;
        }
        for j in 0..d {
            w[j] -= step * gw[j];
        }
        b -= step * gb;
    }
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_instance(seed: u64, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>) {
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 32) as f64 / (1u64 << 31) as f64 - 1.0
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| next()).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if r.iter().sum::<f64>() + 0.3 * next() > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        (FeatureMatrix::from_rows(names, &rows), y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Spec invariant: analytic vs central finite differences to 1e-5
        // relative error on random small instances.
        for seed in 0..50u64 {
            let (x, y) = small_instance(seed * 7 + 1, 12, 3);
            let w: Vec<f64> = (0..3).map(|j| 0.3 * (seed as f64 + j as f64).sin()).collect();
            let b = 0.1 * (seed as f64).cos();
            let l2 = 1.0;
            let (gw, gb) = logistic_gradient(&x, &y, &w, b, l2);
            let eps = 1e-6;
            for j in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += eps;
                wm[j] -= eps;
                let fd =
                    (logistic_loss(&x, &y, &wp, b, l2) - logistic_loss(&x, &y, &wm, b, l2))
                        / (2.0 * eps);
                let denom = fd.abs().max(gw[j].abs()).max(1e-8);
                assert!(
                    (fd - gw[j]).abs() / denom < 1e-5,
                    "seed {seed} w[{j}]: fd {fd} vs analytic {}",
                    gw[j]
                );
            }
            let fdb = (logistic_loss(&x, &y, &w, b + eps, l2)
                - logistic_loss(&x, &y, &w, b - eps, l2))
                / (2.0 * eps);
            let denom = fdb.abs().max(gb.abs()).max(1e-8);
            assert!((fdb - gb).abs() / denom < 1e-5);
        }
    }

    #[test]
    fn descent_reduces_loss() {
        let (x, y) = small_instance(5, 60, 4);
        let loss0 = logistic_loss(&x, &y, &vec![0.0; 4], 0.0, 1.0);
        let (w, b) = fit_logistic(&x, &y, 1.0, 1e-6, 1000);
        let loss1 = logistic_loss(&x, &y, &w, b, 1.0);
        assert!(loss1 < loss0, "{loss1} !< {loss0}");
    }
}
