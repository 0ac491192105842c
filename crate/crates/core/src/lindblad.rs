//! Lindblad master equations: model type, Liouvillian action, steady state,
//! entropy and a fixed-step RK4 integrator.
//!
//! The generator is written in jump form,
//! `L ρ = −i(H_eff ρ − ρ H_eff†) + Σ_l c_l ρ c_l†` with
//! `H_eff = H − (i/2) Σ_l c_l† c_l`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMatrix, C64, I};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Ratio of the second-smallest to the largest singular value of the
/// vectorized Liouvillian below which the null space counts as degenerate.
pub const ERGODICITY_RATIO: f64 = 1e-7;

/// A time-independent Lindblad master equation on a `dim`-level system
/// (units with ħ = 1; `H` in rate units, jump operators in sqrt-rate units).
#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquation {
    dim: usize,
    hamiltonian: CMatrix,
    jump_ops: Vec<CMatrix>,
}

impl MasterEquation {
    /// Builds a model, checking shapes and Hermiticity of `H` at the default tolerance.
    pub fn new(hamiltonian: CMatrix, jump_ops: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(hamiltonian, jump_ops, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(hamiltonian: CMatrix, jump_ops: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim < 2 {
            return Err(Error::InvalidModel(format!("dimension must be at least 2, got {dim}")));
        }
        if hamiltonian.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: hamiltonian.ncols() });
        }
        for op in &jump_ops {
            if op.nrows() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.nrows() });
            }
            if op.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.ncols() });
            }
        }
        let herm = linalg::hermiticity_error(&hamiltonian);
        if herm > tol {
            return Err(Error::InvalidModel(format!("Hamiltonian is not Hermitian (max |H - H†| = {herm:.3e})")));
        }
        Ok(Self { dim, hamiltonian, jump_ops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> &[CMatrix] {
        &self.jump_ops
    }

    /// A characteristic rate: largest Hamiltonian entry plus the summed
    /// largest entries of `c_l† c_l`.
    pub fn rate_scale(&self) -> f64 {
        let h = linalg::max_abs(&self.hamiltonian);
        let d: f64 = self.jump_ops.iter().map(|c| linalg::max_abs(&(c.adjoint() * c))).sum();
        (h + d).max(f64::MIN_POSITIVE)
    }

    /// Default RK4 step, `1e-3` over the rate scale.
    pub fn default_dt(&self) -> f64 {
        1e-3 / self.rate_scale()
    }
}

/// `H_eff = H − (i/2) Σ_l c_l† c_l`.
pub fn effective_hamiltonian(me: &MasterEquation) -> CMatrix {
    let mut heff = me.hamiltonian.clone();
    for c in &me.jump_ops {
        heff -= (c.adjoint() * c) * (I * 0.5);
    }
    heff
}

/// Applies the Liouvillian to an arbitrary `D × D` matrix.
pub fn apply_liouvillian(me: &MasterEquation, rho: &CMatrix) -> Result<CMatrix> {
    check_shape(me.dim, rho)?;
    Ok(liouvillian_with(&effective_hamiltonian(me), &me.jump_ops, rho))
}

fn liouvillian_with(heff: &CMatrix, jump_ops: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = (heff * rho - rho * heff.adjoint()) * (-I);
    for c in jump_ops {
        out += c * rho * c.adjoint();
    }
    out
}

fn check_shape(dim: usize, m: &CMatrix) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.ncols() });
    }
    Ok(())
}

/// The `D² × D²` superoperator matrix acting on row-major vectorized states
/// (`vec(ρ)[i·D + j] = ρ_ij`).
pub fn liouvillian_matrix(me: &MasterEquation) -> CMatrix {
    let d = me.dim;
    let heff = effective_hamiltonian(me);
    let mut sup = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut basis = CMatrix::zeros(d, d);
            basis[(i, j)] = re(1.0);
            let image = liouvillian_with(&heff, &me.jump_ops, &basis);
            for p in 0..d {
                for q in 0..d {
                    sup[(p * d + q, i * d + j)] = image[(p, q)];
                }
            }
        }
    }
    sup
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let herm = linalg::hermiticity_error(&m);
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = linalg::trace(&m);
        if (tr - re(1.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = linalg::hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(m))
    }

    /// Pure state `|ψ⟩⟨ψ|` (the vector is normalized first).
    pub fn pure(psi: &linalg::CVector) -> Self {
        Self(linalg::projector(&linalg::normalized(psi)))
    }

    /// Maximally mixed state `I/D`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim).map(|z| z / dim as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Unique stationary state from the null space of the vectorized Liouvillian.
pub fn steady_state(me: &MasterEquation) -> Result<DensityMatrix> {
    let d = me.dim;
    let sup = liouvillian_matrix(me);
    let svd = sup.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V^T".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let largest = sv[order[order.len() - 1]].max(f64::MIN_POSITIVE);
    let ratio = sv[order[1]] / largest;
    if ratio <= ERGODICITY_RATIO {
        return Err(Error::NonErgodic { ratio });
    }

    let null = v_t.row(order[0]);
    let mut rho = CMatrix::zeros(d, d);
    for p in 0..d {
        for q in 0..d {
            rho[(p, q)] = null[p * d + q].conj();
        }
    }
    let rho = linalg::hermitize(&rho);
    let tr = linalg::trace(&rho).re;
    if tr.abs() < 1e-12 {
        return Err(Error::Numerical("null vector has vanishing trace".into()));
    }
    let rho = rho.map(|z| z / tr);
    DensityMatrix::new(rho).map_err(|e| Error::Numerical(format!("steady state failed validation: {e}")))
}

/// `−Σ λ log₂ λ` over the eigenvalues of ρ, in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    von_neumann_entropy_tol(rho.matrix(), DEFAULT_TOLERANCE)
}

pub fn von_neumann_entropy_tol(rho: &CMatrix, tol: f64) -> Result<f64> {
    let mut h = 0.0;
    for lambda in linalg::hermitian_eigenvalues(rho) {
        if lambda < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {lambda:.3e}")));
        }
        if lambda > 0.0 {
            h -= lambda * lambda.log2();
        }
    }
    Ok(h.max(0.0))
}

/// Fixed-step RK4 integration of the master equation to `t_final`.
///
/// The step is shrunk so an integer number of steps lands exactly on `t_final`.
pub fn integrate_me(me: &MasterEquation, rho0: &DensityMatrix, t_final: f64, dt: f64) -> Result<DensityMatrix> {
    let traj = integrate_me_on_grid(me, rho0, &[t_final], dt)?;
    Ok(DensityMatrix(traj.into_iter().next().expect("one grid point")))
}

/// RK4 solution sampled at each (ascending, non-negative) time in `grid`.
pub fn integrate_me_on_grid(me: &MasterEquation, rho0: &DensityMatrix, grid: &[f64], dt: f64) -> Result<Vec<CMatrix>> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    check_shape(me.dim, rho0.matrix())?;
    let heff = effective_hamiltonian(me);
    let rhs = |r: &CMatrix| liouvillian_with(&heff, &me.jump_ops, r);

    let mut out = Vec::with_capacity(grid.len());
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    for &target in grid {
        if target < t {
            return Err(Error::Precondition("time grid must be ascending and non-negative".into()));
        }
        let span = target - t;
        let steps = (span / dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(&rhs, &rho, h);
            }
        }
        t = target;
        out.push(rho.clone());
    }
    Ok(out)
}

fn rk4_step(rhs: &impl Fn(&CMatrix) -> CMatrix, rho: &CMatrix, h: f64) -> CMatrix {
    let half = re(0.5 * h);
    let k1 = rhs(rho);
    let k2 = rhs(&(rho + &k1 * half));
    let k3 = rhs(&(rho + &k2 * half));
    let k4 = rhs(&(rho + &k3 * re(h)));
    rho + (k1 + (k2 + k3) * re(2.0) + k4) * re(h / 6.0)
}

/// On-disk model: `{ "dim": D, "hamiltonian": [[[re, im], ...], ...], "jump_ops": [...] }`,
/// row-major with complex entries as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub dim: usize,
    pub hamiltonian: Vec<Vec<[f64; 2]>>,
    pub jump_ops: Vec<Vec<Vec<[f64; 2]>>>,
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn rows_to_matrix(dim: usize, rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    if rows.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: rows.len() });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

impl From<&MasterEquation> for ModelFile {
    fn from(me: &MasterEquation) -> Self {
        ModelFile {
            dim: me.dim,
            hamiltonian: matrix_to_rows(&me.hamiltonian),
            jump_ops: me.jump_ops.iter().map(matrix_to_rows).collect(),
        }
    }
}

impl TryFrom<ModelFile> for MasterEquation {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let h = rows_to_matrix(f.dim, &f.hamiltonian)?;
        let ops = f.jump_ops.iter().map(|rows| rows_to_matrix(f.dim, rows)).collect::<Result<Vec<_>>>()?;
        MasterEquation::new(h, ops)
    }
}

impl MasterEquation {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        f.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;

    fn decay(gamma: f64) -> MasterEquation {
        let mut c = CMatrix::zeros(2, 2);
        c[(0, 1)] = re(gamma.sqrt());
        MasterEquation::new(CMatrix::zeros(2, 2), vec![c]).unwrap()
    }

    fn basis(d: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(d);
        v[k] = re(1.0);
        v
    }

    #[test]
    fn pure_decay_liouvillian() {
        let gamma = 0.7;
        let me = decay(gamma);
        let rho = linalg::projector(&basis(2, 1));
        let out = apply_liouvillian(&me, &rho).unwrap();
        let mut expected = CMatrix::zeros(2, 2);
        expected[(0, 0)] = re(gamma);
        expected[(1, 1)] = re(-gamma);
        assert!(linalg::max_abs(&(out - expected)) < 1e-15);
    }

    #[test]
    fn effective_hamiltonian_of_decay() {
        let heff = effective_hamiltonian(&decay(2.0));
        let mut expected = CMatrix::zeros(2, 2);
        expected[(1, 1)] = C64::new(0.0, -1.0);
        assert!(linalg::max_abs(&(heff - expected)) < 1e-15);
    }

    #[test]
    fn effective_hamiltonian_without_jumps_is_h() {
        let h = CMatrix::from_row_slice(2, 2, &[re(1.0), C64::new(0.2, 0.3), C64::new(0.2, -0.3), re(-0.4)]);
        let me = MasterEquation::new(h.clone(), vec![]).unwrap();
        assert_eq!(effective_hamiltonian(&me), h);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let me = decay(1.0);
        let rho = CMatrix::identity(3, 3);
        assert!(matches!(apply_liouvillian(&me, &rho), Err(Error::DimensionMismatch { .. })));
        let bad = MasterEquation::new(CMatrix::zeros(2, 2), vec![CMatrix::zeros(3, 3)]);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = re(1.0);
        assert!(matches!(MasterEquation::new(h, vec![]), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn decay_relaxes_to_ground() {
        let rho = steady_state(&decay(1.3)).unwrap();
        let ground = linalg::projector(&basis(2, 0));
        assert!(linalg::max_abs(&(rho.matrix() - ground)) < 1e-12);
    }

    #[test]
    fn decoupled_level_is_not_ergodic() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(0.0), re(1.0), re(2.5)]));
        let mut c = CMatrix::zeros(3, 3);
        c[(0, 1)] = re(1.0);
        let me = MasterEquation::new(h, vec![c]).unwrap();
        assert!(matches!(steady_state(&me), Err(Error::NonErgodic { .. })));
    }

    #[test]
    fn entropy_of_pure_and_mixed_states() {
        let pure = DensityMatrix::pure(&basis(3, 1));
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        for d in 2..=4 {
            let h = von_neumann_entropy(&DensityMatrix::maximally_mixed(d)).unwrap();
            assert!((h - (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.1), re(-0.1)]));
        assert!(matches!(von_neumann_entropy_tol(&m, 1e-9), Err(Error::InvalidState(_))));
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn zero_time_integration_is_identity() {
        let me = decay(1.0);
        let rho0 = DensityMatrix::pure(&basis(2, 1));
        let out = integrate_me(&me, &rho0, 0.0, 1e-3).unwrap();
        assert_eq!(out, rho0);
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let me = decay(1.0);
        let rho0 = DensityMatrix::pure(&basis(2, 1));
        let out = integrate_me(&me, &rho0, 2.0, 1e-3).unwrap();
        assert!((out.matrix()[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let me = decay(0.5);
        let back = MasterEquation::from_json(&me.to_json().unwrap()).unwrap();
        assert_eq!(back, me);
    }
}
