//! Lawson–Hanson active-set nonnegative least squares, sized for the handful
//! of unknowns that appear in rate fitting.

use nalgebra::{DMatrix, DVector};

/// Solves `min ‖A x − b‖₂` subject to `x ≥ 0`. Returns `(x, residual norm)`.
///
/// Columns are scaled to unit norm before the active-set iteration so the
/// optimality test does not depend on how large the columns are.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    if n == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut scaled = a.clone();
    for (j, &nj) in norms.iter().enumerate() {
        if nj > 0.0 {
            scaled.column_mut(j).unscale_mut(nj);
        }
    }
    let y = nnls_unit_columns(&scaled, b);
    let x = DVector::from_iterator(n, y.iter().zip(&norms).map(|(&yj, &nj)| if nj > 0.0 { yj / nj } else { 0.0 }));
    let residual = (a * &x - b).norm();
    (x, residual)
}

fn nnls_unit_columns(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let tol = 10.0 * f64::EPSILON * b.norm() * (a.nrows().max(n) as f64);
    let mut passive = vec![false; n];

    for _ in 0..3 * n + 3 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let s = restricted_lstsq(a, b, &passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - s[i]));
            }
            x += (&s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

fn restricted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = a.select_columns(&cols);
    let sol = sub.svd(true, true).solve(b, 1e-15).expect("SVD computed U and V^T");
    let mut full = DVector::zeros(passive.len());
    for (k, &i) in cols.iter().enumerate() {
        full[i] = sol[k];
    }
    full
}
