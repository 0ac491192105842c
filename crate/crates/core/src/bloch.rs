//! Bloch-vector form `ṙ = A r + b` of a qubit master equation.
//!
//! Convention: basis `(|0⟩, |1⟩)` with `|0⟩` the ground state, standard Pauli
//! matrices `σx = [[0,1],[1,0]]`, `σy = [[0,−i],[i,0]]`, `σz = diag(1,−1)`, and
//! `r_i = Tr[ρ σ_i]`. The ground state therefore sits at `r = (0,0,1)` and the
//! excited state `|1⟩` at `(0,0,−1)`. With this choice the driven, decaying
//! two-level atom (`H = Ω σx / 2`, `c = √γ |0⟩⟨1|`) has
//! `A = [[−γ/2,0,0],[0,−γ/2,−Ω],[0,Ω,−γ]]` and `b = (0,0,γ)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{self, DensityMatrix, MasterEquation, DEFAULT_TOLERANCE};
use crate::linalg::{self, c, re, CMatrix, RealEigenpair, C64};

pub fn pauli() -> [CMatrix; 3] {
    let z = re(0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, re(1.0), re(1.0), z]),
        CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        CMatrix::from_row_slice(2, 2, &[re(1.0), z, z, re(-1.0)]),
    ]
}

/// `(Tr[X σx], Tr[X σy], Tr[X σz])` for any 2×2 matrix `X` (real part).
pub fn bloch_components(x: &CMatrix) -> Vector3<f64> {
    // Tr[X σx] = X01 + X10, Tr[X σy] = i(X01 − X10), Tr[X σz] = X00 − X11
    let x01 = x[(0, 1)];
    let x10 = x[(1, 0)];
    Vector3::new((x01 + x10).re, (C64::i() * (x01 - x10)).re, (x[(0, 0)] - x[(1, 1)]).re)
}

/// `(I + r·σ)/2` without validation.
pub fn bloch_matrix(r: &Vector3<f64>) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[re(0.5 * (1.0 + r.z)), c(0.5 * r.x, -0.5 * r.y), c(0.5 * r.x, 0.5 * r.y), re(0.5 * (1.0 - r.z))],
    )
}

pub fn density_to_bloch(rho: &DensityMatrix) -> Result<Vector3<f64>> {
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    Ok(bloch_components(rho.matrix()))
}

pub fn bloch_to_density(r: &Vector3<f64>) -> Result<DensityMatrix> {
    if r.norm() > 1.0 + DEFAULT_TOLERANCE {
        return Err(Error::InvalidState(format!("Bloch vector norm {} exceeds 1", r.norm())));
    }
    DensityMatrix::new(bloch_matrix(r))
}

/// Drift matrix and drive vector of a qubit master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochModel {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
}

/// Reads off `A` and `b` from the Liouvillian's action on `I/2` and `σ_i/2`.
pub fn to_bloch(me: &MasterEquation) -> Result<BlochModel> {
    if me.dim() != 2 {
        return Err(Error::UnsupportedDimension(me.dim()));
    }
    let half = re(0.5);
    let b = bloch_components(&lindblad::apply_liouvillian(me, &CMatrix::identity(2, 2).map(|z| z * half))?);
    let mut a = Matrix3::zeros();
    for (i, s) in pauli().iter().enumerate() {
        let col = bloch_components(&lindblad::apply_liouvillian(me, &s.map(|z| z * half))?);
        a.set_column(i, &col);
    }
    Ok(BlochModel { a, b })
}

impl BlochModel {
    pub fn new(a: Matrix3<f64>, b: Vector3<f64>) -> Self {
        Self { a, b }
    }

    /// `A r + b`.
    pub fn drift(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.a * r + self.b
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// True iff every eigenvalue of `A` has a strictly negative real part.
    pub fn is_ergodic(&self) -> bool {
        self.eigenvalues().iter().all(|z| z.re < 0.0)
    }

    /// `r_ss = −A⁻¹ b`.
    pub fn steady_state(&self) -> Result<Vector3<f64>> {
        if !self.is_ergodic() {
            return Err(Error::NonErgodic { ratio: 0.0 });
        }
        let lu = self.a.lu();
        let x = lu.solve(&(-self.b)).ok_or_else(|| Error::Numerical("drift matrix is singular".into()))?;
        Ok(x)
    }

    pub fn real_eigenpairs(&self) -> Vec<RealEigenpair> {
        linalg::real_eigenpairs(&self.a).1
    }

    /// Largest absolute entry of `A` and `b`; used to scale rate tolerances.
    pub fn rate_scale(&self) -> f64 {
        self.a.amax().max(self.b.amax()).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poles_and_centre() {
        let ground = bloch_to_density(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((ground.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        let mixed = bloch_to_density(&Vector3::zeros()).unwrap();
        assert_eq!(mixed, DensityMatrix::maximally_mixed(2));
        assert_eq!(density_to_bloch(&mixed).unwrap(), Vector3::zeros());
    }

    #[test]
    fn outside_sphere_is_rejected() {
        assert!(matches!(bloch_to_density(&Vector3::new(0.8, 0.7, 0.0)), Err(Error::InvalidState(_))));
    }

    #[test]
    fn free_model_has_zero_drift() {
        let me = MasterEquation::new(CMatrix::zeros(2, 2), vec![]).unwrap();
        let m = to_bloch(&me).unwrap();
        assert_eq!(m.a, Matrix3::zeros());
        assert_eq!(m.b, Vector3::zeros());
    }

    #[test]
    fn to_bloch_rejects_qutrits() {
        let me = MasterEquation::new(CMatrix::zeros(3, 3), vec![]).unwrap();
        assert!(matches!(to_bloch(&me), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn pure_dephasing_is_flagged_non_ergodic() {
        let gamma: f64 = 0.3;
        let cz = pauli()[2].map(|z| z * gamma.sqrt());
        let me = MasterEquation::new(CMatrix::zeros(2, 2), vec![cz]).unwrap();
        let m = to_bloch(&me).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(-2.0 * gamma, -2.0 * gamma, 0.0));
        assert!((m.a - expected).amax() < 1e-15);
        assert!(m.b.amax() < 1e-15);
        assert!(!m.is_ergodic());
        assert!(lindblad::steady_state(&me).is_err());
    }
}
