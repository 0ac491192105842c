//! Unravelling freedom of a master equation and the adaptive back-out for
//! cyclic ensembles with a single jump operator.
//!
//! The master equation is unchanged by `c'_m = Σ_l S_ml c_l + β_m` together
//! with `H' = H − (i/2) Σ_m (β_m* c'_m − β_m c'_m†)` for any semi-unitary `S`
//! and complex `β`. With one jump operator and memory state `k`, adding a
//! local oscillator `β^k` gives the jump operator `c + β^k` and
//!
//! ```text
//!   H_eff^k = H_eff − i β^k* c − (i/2)|β^k|²
//! ```
//!
//! whose anti-Hermitian part is `−(i/2)(c + β^k)†(c + β^k)`, so the no-jump
//! norm decays at the jump rate. Writing `c|φ_k⟩ = a_k|φ_k⟩ + b_k|φ_{k+1}⟩`,
//! the choice `β^k = −a_k` sends `|φ_k⟩` to `|φ_{k+1}⟩` on every jump and
//! leaves it stationary between jumps.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bloch::bloch_components;
use crate::ensemble::PREnsemble;
use crate::error::{Error, Result};
use crate::lindblad::{effective_hamiltonian, MasterEquation};
use crate::linalg::{self, c, re, CMatrix, CVector, C64, I};

/// Tolerance on unit norm of state vectors.
pub const STATE_TOLERANCE: f64 = 1e-9;
/// Residual tolerance (relative to the model's rate scale) for the back-out checks.
pub const BACKOUT_TOLERANCE: f64 = 1e-9;

/// A semi-unitary mixing `S` (M × L) of the jump operators plus displacements `β` (length M).
#[derive(Debug, Clone, PartialEq)]
pub struct UnravellingTransform {
    s: CMatrix,
    beta: Vec<C64>,
}

impl UnravellingTransform {
    pub fn new(s: CMatrix, beta: Vec<C64>) -> Result<Self> {
        if beta.len() != s.nrows() {
            return Err(Error::DimensionMismatch { expected: s.nrows(), got: beta.len() });
        }
        let gram = s.adjoint() * &s;
        let deviation = linalg::max_abs(&(gram - CMatrix::identity(s.ncols(), s.ncols())));
        if deviation > 1e-9 {
            return Err(Error::NotSemiUnitary { deviation });
        }
        Ok(Self { s, beta })
    }

    /// `S = I_L`, `β` arbitrary.
    pub fn displacement(beta: Vec<C64>) -> Self {
        let l = beta.len();
        Self { s: CMatrix::identity(l, l), beta }
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }
}

pub fn transform_me(me: &MasterEquation, t: &UnravellingTransform) -> Result<MasterEquation> {
    let l = me.jump_ops().len();
    if t.s.ncols() != l {
        return Err(Error::DimensionMismatch { expected: l, got: t.s.ncols() });
    }
    let d = me.dim();
    let identity = CMatrix::identity(d, d);
    let mut h = me.hamiltonian().clone();
    let mut ops = Vec::with_capacity(t.s.nrows());
    for (m, &beta) in t.beta.iter().enumerate() {
        let mut op = &identity * beta;
        for (li, cl) in me.jump_ops().iter().enumerate() {
            op += cl * t.s[(m, li)];
        }
        h -= (&op * beta.conj() - op.adjoint() * beta) * (I * 0.5);
        ops.push(op);
    }
    // H' is Hermitian in exact arithmetic; drop rounding noise before validation.
    MasterEquation::new(linalg::hermitize(&h), ops)
}

/// Coefficients `(a_k, b_k)` with `c|φ_k⟩ = a_k|φ_k⟩ + b_k|φ_next⟩`.
pub fn decompose_jump_action(jump: &CMatrix, phi: &CVector, phi_next: &CVector) -> Result<(C64, C64)> {
    for v in [phi, phi_next] {
        if (v.norm() - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::Precondition(format!("state vector has norm {}", v.norm())));
        }
    }
    if phi.dotc(phi_next).norm() > 1.0 - 1e-9 {
        return Err(Error::DegenerateCycle { index: 0, next: 1 });
    }
    let target = jump * phi;
    let d = phi.len();
    let mut basis = CMatrix::zeros(d, 2);
    basis.set_column(0, phi);
    basis.set_column(1, phi_next);
    let coeffs = basis
        .clone()
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&basis * &coeffs - &target).norm();
    if residual > 1e-9 * target.norm().max(1.0) {
        return Err(Error::InvalidCycle { residual });
    }
    Ok((coeffs[0], coeffs[1]))
}

/// Pure state with Bloch vector `r`; the first non-negligible amplitude is real and positive.
pub fn bloch_to_statevector(r: &Vector3<f64>) -> Result<CVector> {
    if (r.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!("Bloch vector norm {} is not 1", r.norm())));
    }
    let r = r.normalize();
    // |ψ⟩ = (cos θ/2, e^{iφ} sin θ/2) up to phase; pick the better-conditioned component.
    let up = ((1.0 + r.z) / 2.0).max(0.0).sqrt();
    let down = ((1.0 - r.z) / 2.0).max(0.0).sqrt();
    let psi = if up >= down {
        CVector::from_vec(vec![re(up), c(r.x, r.y) / (2.0 * up)])
    } else {
        CVector::from_vec(vec![c(r.x, -r.y) / (2.0 * down), re(down)])
    };
    Ok(fix_phase(&linalg::normalized(&psi)))
}

/// Bloch vector of a qubit pure state.
pub fn statevector_to_bloch(psi: &CVector) -> Result<Vector3<f64>> {
    if psi.len() != 2 {
        return Err(Error::UnsupportedDimension(psi.len()));
    }
    Ok(bloch_components(&linalg::projector(&linalg::normalized(psi))))
}

/// Rotates the global phase so the first amplitude above `1e-12` is real positive.
pub fn fix_phase(psi: &CVector) -> CVector {
    match psi.iter().find(|z| z.norm() > 1e-12) {
        Some(first) => {
            let phase = first.conj() / first.norm();
            psi.map(|z| z * phase)
        }
        None => psi.clone(),
    }
}

/// Adaptive local-oscillator settings realizing a cyclic ensemble.
#[derive(Debug, Clone)]
pub struct AdaptiveScheme {
    pub betas: Vec<C64>,
    /// `c + β^k` for each memory state.
    pub jump_ops: Vec<CMatrix>,
    /// `H_eff^k` for each memory state.
    pub eff_hams: Vec<CMatrix>,
    pub cycle: Vec<CVector>,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    /// Eigenvalue of `H_eff^k` on `|φ_k⟩`.
    pub no_jump_eigenvalues: Vec<C64>,
    /// `|b_k|²`, the jump rate out of memory state `k`.
    pub jump_rates: Vec<f64>,
    /// `‖H_eff^k|φ_k⟩ − μ_k|φ_k⟩‖` per memory state.
    pub stationarity_residuals: Vec<f64>,
    /// `‖(c + β^k)|φ_k⟩ − b_k|φ_{k+1}⟩‖` per memory state.
    pub jump_residuals: Vec<f64>,
}

impl AdaptiveScheme {
    pub fn k(&self) -> usize {
        self.cycle.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.stationarity_residuals.iter().chain(&self.jump_residuals).fold(0.0, |m, &r| m.max(r))
    }

    pub fn to_file(&self) -> SchemeFile {
        SchemeFile {
            betas: self.betas.iter().map(|z| [z.re, z.im]).collect(),
            jump_rates: self.jump_rates.clone(),
            cycle_states: self.cycle.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

/// JSON form: `{ "betas": [[re, im], ...], "jump_rates": [...], "cycle_states": [[[re, im], ...], ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFile {
    pub betas: Vec<[f64; 2]>,
    pub jump_rates: Vec<f64>,
    pub cycle_states: Vec<Vec<[f64; 2]>>,
}

/// Sets `β^k = −a_k` for each memory state and verifies both jump-cycle conditions.
pub fn backout_beta(me: &MasterEquation, cycle: &[CVector]) -> Result<AdaptiveScheme> {
    let [jump] = me.jump_ops() else {
        return Err(Error::Unsupported(format!(
            "adaptive back-out needs exactly one jump operator, model has {}",
            me.jump_ops().len()
        )));
    };
    let k = cycle.len();
    if k < 2 {
        return Err(Error::Precondition(format!("a jump cycle needs at least two states, got {k}")));
    }
    for v in cycle {
        if v.len() != me.dim() {
            return Err(Error::DimensionMismatch { expected: me.dim(), got: v.len() });
        }
    }
    let tol = BACKOUT_TOLERANCE * me.rate_scale().max(1.0);
    let heff = effective_hamiltonian(me);
    let d = me.dim();
    let identity = CMatrix::identity(d, d);

    let mut scheme = AdaptiveScheme {
        betas: Vec::with_capacity(k),
        jump_ops: Vec::with_capacity(k),
        eff_hams: Vec::with_capacity(k),
        cycle: cycle.to_vec(),
        a: Vec::with_capacity(k),
        b: Vec::with_capacity(k),
        no_jump_eigenvalues: Vec::with_capacity(k),
        jump_rates: Vec::with_capacity(k),
        stationarity_residuals: Vec::with_capacity(k),
        jump_residuals: Vec::with_capacity(k),
    };
    for idx in 0..k {
        let next = (idx + 1) % k;
        let (phi, phi_next) = (&cycle[idx], &cycle[next]);
        let (a, b) = decompose_jump_action(jump, phi, phi_next).map_err(|e| match e {
            Error::DegenerateCycle { .. } => Error::DegenerateCycle { index: idx, next },
            other => other,
        })?;
        let beta = -a;
        let jump_k = jump + &identity * beta;
        let heff_k = &heff - jump * (I * beta.conj()) - &identity * (I * 0.5 * beta.norm_sqr());

        let evolved = &heff_k * phi;
        let mu = phi.dotc(&evolved);
        let stationarity = (evolved - phi * mu).norm();
        let jump_residual = (&jump_k * phi - phi_next * b).norm();
        if stationarity > tol || jump_residual > tol {
            return Err(Error::InconsistentEnsemble { index: idx, residual: stationarity.max(jump_residual) });
        }
        if b.norm_sqr() <= tol {
            return Err(Error::Precondition(format!("memory state {idx} never jumps (absorbing state)")));
        }

        scheme.betas.push(beta);
        scheme.jump_ops.push(jump_k);
        scheme.eff_hams.push(heff_k);
        scheme.a.push(a);
        scheme.b.push(b);
        scheme.no_jump_eigenvalues.push(mu);
        scheme.jump_rates.push(b.norm_sqr());
        scheme.stationarity_residuals.push(stationarity);
        scheme.jump_residuals.push(jump_residual);
    }
    Ok(scheme)
}

/// Converts a qubit ensemble (state `j` jumps to `j + 1 mod K`) to state
/// vectors and backs out its scheme.
pub fn scheme_for_ensemble(me: &MasterEquation, ensemble: &PREnsemble) -> Result<AdaptiveScheme> {
    if me.dim() != 2 {
        return Err(Error::UnsupportedDimension(me.dim()));
    }
    let cycle = ensemble.states.iter().map(bloch_to_statevector).collect::<Result<Vec<_>>>()?;
    backout_beta(me, &cycle)
}

/// The `β = 0` scheme for a given cycle; used to exercise the simulator on
/// models whose plain unravelling already jumps cyclically.
pub fn trivial_scheme(me: &MasterEquation, cycle: &[CVector]) -> Result<AdaptiveScheme> {
    let [jump] = me.jump_ops() else {
        return Err(Error::Unsupported("trivial scheme needs exactly one jump operator".into()));
    };
    let heff = effective_hamiltonian(me);
    let k = cycle.len();
    let mut scheme = AdaptiveScheme {
        betas: vec![re(0.0); k],
        jump_ops: vec![jump.clone(); k],
        eff_hams: vec![heff.clone(); k],
        cycle: cycle.to_vec(),
        a: Vec::new(),
        b: Vec::new(),
        no_jump_eigenvalues: Vec::new(),
        jump_rates: Vec::new(),
        stationarity_residuals: Vec::new(),
        jump_residuals: Vec::new(),
    };
    for (idx, phi) in cycle.iter().enumerate() {
        let evolved = &heff * phi;
        let mu = phi.dotc(&evolved);
        scheme.no_jump_eigenvalues.push(mu);
        scheme.stationarity_residuals.push((evolved - phi * mu).norm());
        let kicked = jump * phi;
        let b = cycle[(idx + 1) % k].dotc(&kicked);
        scheme.b.push(b);
        scheme.a.push(phi.dotc(&kicked));
        scheme.jump_rates.push(kicked.norm_squared());
        scheme.jump_residuals.push(linalg::orthogonal_residual(&kicked, &cycle[(idx + 1) % k]).norm());
    }
    Ok(scheme)
}

/// Bloch vector of each cycle state (qubits only).
pub fn cycle_bloch_vectors(scheme: &AdaptiveScheme) -> Result<Vec<Vector3<f64>>> {
    scheme.cycle.iter().map(statevector_to_bloch).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluorescence::build_fluorescence_me;
    use crate::lindblad::apply_liouvillian;

    fn ket(d: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(d);
        v[k] = re(1.0);
        v
    }

    fn liouvillian_gap(a: &MasterEquation, b: &MasterEquation) -> f64 {
        let d = a.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = re(1.0);
                let diff = apply_liouvillian(a, &e).unwrap() - apply_liouvillian(b, &e).unwrap();
                worst = worst.max(linalg::max_abs(&diff));
            }
        }
        worst
    }

    #[test]
    fn identity_transform_is_a_no_op() {
        let me = build_fluorescence_me(1.0, 0.3).unwrap();
        let t = UnravellingTransform::displacement(vec![re(0.0)]);
        assert_eq!(transform_me(&me, &t).unwrap(), me);
    }

    #[test]
    fn displacement_keeps_liouvillian() {
        let me = build_fluorescence_me(1.0, 0.2).unwrap();
        let t = UnravellingTransform::displacement(vec![re(0.3)]);
        let out = transform_me(&me, &t).unwrap();
        assert!(liouvillian_gap(&me, &out) < 1e-10);
        assert!(linalg::max_abs(&(out.jump_ops()[0].clone() - me.jump_ops()[0].clone())) > 0.29);
    }

    #[test]
    fn isometric_splitting_keeps_liouvillian() {
        let me = build_fluorescence_me(1.0, 0.2).unwrap();
        let s = CMatrix::from_column_slice(2, 1, &[re(0.5f64.sqrt()), re(0.5f64.sqrt())]);
        let t = UnravellingTransform::new(s, vec![re(0.0), re(0.0)]).unwrap();
        let out = transform_me(&me, &t).unwrap();
        assert_eq!(out.jump_ops().len(), 2);
        assert!(liouvillian_gap(&me, &out) < 1e-12);
    }

    #[test]
    fn non_isometry_is_rejected() {
        let s = CMatrix::from_column_slice(2, 1, &[re(1.0), re(1.0)]);
        assert!(matches!(UnravellingTransform::new(s, vec![re(0.0); 2]), Err(Error::NotSemiUnitary { .. })));
    }

    #[test]
    fn decay_jump_decomposition() {
        let gamma: f64 = 0.8;
        let me = build_fluorescence_me(gamma, 0.0).unwrap();
        let (a, b) = decompose_jump_action(&me.jump_ops()[0], &ket(2, 1), &ket(2, 0)).unwrap();
        assert!(a.norm() < 1e-15);
        assert!((b - re(gamma.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn eigenvector_has_no_transfer_component() {
        let jump = CMatrix::from_row_slice(2, 2, &[re(0.7), re(0.0), re(0.0), re(-0.2)]);
        let other = linalg::normalized(&CVector::from_vec(vec![re(1.0), c(0.3, 0.4)]));
        let (a, b) = decompose_jump_action(&jump, &ket(2, 0), &other).unwrap();
        assert!((a - re(0.7)).norm() < 1e-14);
        assert!(b.norm() < 1e-14);
    }

    #[test]
    fn jump_outside_span_is_invalid() {
        let mut jump = CMatrix::zeros(3, 3);
        jump[(2, 0)] = re(1.0);
        let r = decompose_jump_action(&jump, &ket(3, 0), &ket(3, 1));
        assert!(matches!(r, Err(Error::InvalidCycle { .. })));
    }

    #[test]
    fn parallel_states_are_degenerate() {
        let jump = CMatrix::identity(2, 2);
        let phase = ket(2, 0).map(|z| z * c(0.0, 1.0));
        let r = decompose_jump_action(&jump, &ket(2, 0), &phase);
        assert!(matches!(r, Err(Error::DegenerateCycle { .. })));
    }

    #[test]
    fn statevector_poles_and_equator() {
        let up = bloch_to_statevector(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((up.clone() - ket(2, 0)).norm() < 1e-15);
        let down = bloch_to_statevector(&Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((down - ket(2, 1)).norm() < 1e-15);
        let plus = bloch_to_statevector(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let h = 0.5f64.sqrt();
        assert!((plus[0] - re(h)).norm() < 1e-15 && (plus[1] - re(h)).norm() < 1e-15);
        assert!(bloch_to_statevector(&Vector3::new(0.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn multi_operator_models_are_unsupported() {
        let me = MasterEquation::new(CMatrix::zeros(2, 2), vec![CMatrix::identity(2, 2), CMatrix::identity(2, 2)]).unwrap();
        let r = backout_beta(&me, &[ket(2, 0), ket(2, 1)]);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn single_state_and_absorbing_cycles_are_rejected() {
        let me = build_fluorescence_me(1.0, 0.0).unwrap();
        assert!(matches!(backout_beta(&me, &[ket(2, 1)]), Err(Error::Precondition(_))));
        assert!(backout_beta(&me, &[ket(2, 1), ket(2, 0)]).is_err());
    }

    #[test]
    fn non_pr_cycle_is_inconsistent() {
        let me = build_fluorescence_me(1.0, 0.2).unwrap();
        let x = bloch_to_statevector(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let y = bloch_to_statevector(&Vector3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(matches!(backout_beta(&me, &[x, y]), Err(Error::InconsistentEnsemble { .. })));
    }
}
