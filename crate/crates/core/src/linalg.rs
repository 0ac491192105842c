//! Small dense complex/real helpers shared across the crate.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entry-wise modulus of `m - m†`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Real eigenvalues of a Hermitian matrix (the anti-Hermitian part is discarded).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitize(m);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// Trace distance `½ ‖a − b‖₁` between two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|l| l.abs()).sum::<f64>()
}

/// Projector `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
pub fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

pub fn normalized(psi: &CVector) -> CVector {
    let n = psi.norm();
    psi.map(|z| z / n)
}

/// Component of `v` orthogonal to the unit vector `u`.
pub fn orthogonal_residual(v: &CVector, u: &CVector) -> CVector {
    let overlap = u.dotc(v);
    v - u.map(|z| z * overlap)
}

/// A real eigenpair of a real 3×3 matrix.
#[derive(Debug, Clone, Copy)]
pub struct RealEigenpair {
    pub value: f64,
    pub vector: Vector3<f64>,
}

/// Eigenvalues of a real 3×3 matrix together with the eigenvectors that are
/// real up to a global phase.
///
/// An eigenvalue counts as real when `|Im λ| < 1e-9 · ρ(A)`. Its eigenvector
/// is phase-rotated to minimize the imaginary part and accepted only if the
/// leftover imaginary norm is below `1e-8`. Repeated real eigenvalues
/// contribute one vector per null direction of `A − λI`.
pub fn real_eigenpairs(a: &Matrix3<f64>) -> (Vec<C64>, Vec<RealEigenpair>) {
    let eigenvalues: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    let radius = eigenvalues.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let scale = a.amax().max(f64::MIN_POSITIVE);

    let mut pairs: Vec<RealEigenpair> = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for lambda in &eigenvalues {
        if lambda.im.abs() >= 1e-9 * radius {
            continue;
        }
        // A repeated eigenvalue shows up once per multiplicity; its whole null
        // space is collected on first sight.
        if seen.iter().any(|s| (s - lambda.re).abs() < 1e-9 * radius) {
            continue;
        }
        seen.push(lambda.re);

        let shifted = a - Matrix3::identity() * lambda.re;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let multiplicity = eigenvalues
            .iter()
            .filter(|z| (z.re - lambda.re).abs() < 1e-9 * radius && z.im.abs() < 1e-9 * radius)
            .count();
        // An isolated real eigenvalue can still carry an eigenvector that is
        // not real when the numerics are ill conditioned.
        if multiplicity == 1 && imaginary_residual(a, lambda.re) >= 1e-8 {
            continue;
        }
        for (rank, &idx) in order.iter().enumerate() {
            let sigma = svd.singular_values[idx];
            if rank > 0 && (rank >= multiplicity || sigma > 1e-7 * scale) {
                break;
            }
            let v: Vector3<f64> = v_t.row(idx).transpose();
            pairs.push(RealEigenpair { value: lambda.re, vector: v.normalize() });
        }
    }
    (eigenvalues, pairs)
}

/// Imaginary norm left in the phase-optimal complex eigenvector for `lambda`.
fn imaginary_residual(a: &Matrix3<f64>, lambda: f64) -> f64 {
    let ac: nalgebra::Matrix3<C64> = a.map(re) - nalgebra::Matrix3::<C64>::identity() * re(lambda);
    let svd = ac.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let idx = svd.singular_values.imin();
    let v: Vec<C64> = v_t.row(idx).iter().map(|z| z.conj()).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let sq: C64 = v.iter().map(|z| z * z).sum();
    let phase = C64::from_polar(1.0, -0.5 * sq.arg());
    v.iter().map(|z| (z * phase).im.powi(2)).sum::<f64>().sqrt() / norm
}
