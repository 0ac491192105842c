//! Physically realizable (PR) ensembles of a qubit master equation.
//!
//! An ensemble `{wp_k, r_k}` of pure Bloch states is PR when there are rates
//! `κ_jk ≥ 0` (rate of jumping from state `j` to state `k`) with
//! `A r_j + b = Σ_k κ_jk (r_k − r_j)` for every `j`.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::bloch::BlochModel;
use crate::error::{Error, Result};
use crate::nnls::nnls;

/// Tolerance on `‖r_k‖ = 1` for pure Bloch states.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-8;

/// Feasibility threshold used by [`check_pr`] when the caller has no better value.
pub fn default_pr_tolerance(bloch: &BlochModel) -> f64 {
    1e-8 * bloch.rate_scale()
}

/// A finite ensemble of pure qubit states with its jump-rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PREnsemble {
    pub states: Vec<Vector3<f64>>,
    pub probs: Vec<f64>,
    /// `rates[(j, k)]` is the rate of jumping from state `j` to state `k`.
    pub rates: DMatrix<f64>,
    pub entropy_bits: f64,
    /// Largest residual of the PR condition with `rates`.
    pub residual: f64,
    /// Eigenvalue of `A` the ensemble was built from (two-state construction only).
    pub eigenvalue: Option<f64>,
}

impl PREnsemble {
    pub fn k(&self) -> usize {
        self.states.len()
    }

    /// `Σ_k wp_k r_k`, which should reproduce `r_ss`.
    pub fn mixture(&self) -> Vector3<f64> {
        self.states.iter().zip(&self.probs).map(|(r, p)| r * *p).sum()
    }

    /// The ensemble reflected through the `x = 0` plane.
    pub fn mirrored(&self) -> PREnsemble {
        let mut out = self.clone();
        for r in &mut out.states {
            r.x = -r.x;
        }
        out
    }

    /// True when reflection through `x = 0` maps the ensemble onto itself
    /// (as a set of weighted states).
    pub fn is_mirror_symmetric(&self, tol: f64) -> bool {
        self.states.iter().zip(&self.probs).all(|(r, p)| {
            let m = Vector3::new(-r.x, r.y, r.z);
            self.states.iter().zip(&self.probs).any(|(s, q)| (s - m).amax() < tol && (p - q).abs() < tol)
        })
    }

    /// Largest deviation of `‖r_k‖` from 1.
    pub fn max_norm_error(&self) -> f64 {
        self.states.iter().map(|r| (r.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest `‖A r_j + b − Σ_k κ_jk (r_k − r_j)‖` over `j`.
    pub fn pr_residual(&self, bloch: &BlochModel) -> f64 {
        pr_residual(bloch, &self.states, &self.rates)
    }

    pub fn to_file(&self) -> EnsembleFile {
        EnsembleFile {
            k: self.k(),
            states_bloch: self.states.iter().map(|r| [r.x, r.y, r.z]).collect(),
            probs: self.probs.clone(),
            rates: (0..self.k()).map(|j| (0..self.k()).map(|k| self.rates[(j, k)]).collect()).collect(),
            entropy_bits: self.entropy_bits,
            residual: self.residual,
        }
    }
}

/// JSON form: `{ "K", "states_bloch", "probs", "rates", "entropy_bits", "residual" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub states_bloch: Vec<[f64; 3]>,
    pub probs: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
    pub entropy_bits: f64,
    pub residual: f64,
}

pub(crate) fn pr_residual(bloch: &BlochModel, states: &[Vector3<f64>], rates: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (j, rj) in states.iter().enumerate() {
        let mut lhs = bloch.drift(rj);
        for (k, rk) in states.iter().enumerate() {
            if k != j {
                lhs -= (rk - rj) * rates[(j, k)];
            }
        }
        worst = worst.max(lhs.norm());
    }
    worst
}

/// Outcome of fitting nonnegative rates to a candidate ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCheck {
    pub rates: DMatrix<f64>,
    pub residual: f64,
    pub feasible: bool,
}

/// Fits `κ_jk ≥ 0` row by row with NNLS; the ensemble is PR iff the largest
/// row residual is below `tol`.
pub fn check_pr(bloch: &BlochModel, states: &[Vector3<f64>], tol: f64) -> Result<PrCheck> {
    for (k, r) in states.iter().enumerate() {
        if (r.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::Precondition(format!("state {k} has norm {} (must be a pure state)", r.norm())));
        }
    }
    let n = states.len();
    let mut rates = DMatrix::zeros(n, n);
    let mut residual = 0.0f64;
    for (j, rj) in states.iter().enumerate() {
        let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        let mut design = DMatrix::zeros(3, others.len());
        for (col, &k) in others.iter().enumerate() {
            design.set_column(col, &(states[k] - rj));
        }
        let target = DVector::from_column_slice(bloch.drift(rj).as_slice());
        let (kappa, row_res) = nnls(&design, &target);
        for (col, &k) in others.iter().enumerate() {
            rates[(j, k)] = kappa[col];
        }
        residual = residual.max(row_res);
    }
    Ok(PrCheck { rates, residual, feasible: residual < tol })
}

/// Stationary distribution of the continuous-time Markov chain whose
/// off-diagonal generator entries are `rates[(j, k)]`.
pub fn stationary_probs_from_rates(rates: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rates.nrows();
    if rates.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rates.ncols() });
    }
    for j in 0..n {
        if rates[(j, j)] != 0.0 {
            return Err(Error::Precondition("rate matrix must have a zero diagonal".into()));
        }
        for k in 0..n {
            if rates[(j, k)] < 0.0 || !rates[(j, k)].is_finite() {
                return Err(Error::Precondition(format!("rate ({j},{k}) = {} is not a finite nonnegative number", rates[(j, k)])));
            }
        }
    }
    if n == 0 {
        return Err(Error::Precondition("empty rate matrix".into()));
    }
    if !irreducible(rates) {
        return Err(Error::Reducible);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }

    // πᵀ Q = 0 with the last balance equation replaced by Σ π = 1.
    let mut system = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            system[(k, j)] = if j == k { -rates.row(j).sum() } else { rates[(j, k)] };
        }
    }
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = system.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular balance equations".into()))?;
    Ok(pi.iter().map(|p| p.max(0.0)).collect())
}

fn irreducible(rates: &DMatrix<f64>) -> bool {
    let n = rates.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(j) = stack.pop() {
            for k in 0..n {
                let w = if forward { rates[(j, k)] } else { rates[(k, j)] };
                if w > 0.0 && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// `−Σ p log₂ p` in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> Result<f64> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|&p| p < -1e-12) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("not a probability vector (sum {total})")));
    }
    Ok(probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>().max(0.0))
}

/// Real polynomial constraint and unknown counts for a `K`-state PR ensemble
/// in dimension `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofCount {
    pub constraints: usize,
    pub unknowns: usize,
    pub underdetermined: bool,
}

pub fn dof_count(dim: usize, k: usize) -> Result<DofCount> {
    if dim < 2 || k < 1 {
        return Err(Error::Precondition(format!("need D ≥ 2 and K ≥ 1, got D = {dim}, K = {k}")));
    }
    let constraints = k * dim * dim;
    let unknowns = k * (2 * dim + k - 2);
    Ok(DofCount { constraints, unknowns, underdetermined: k > (dim - 1).pow(2) + 1 })
}

/// Steady state of `bloch`, rejecting pure ones.
pub(crate) fn mixed_steady_state(bloch: &BlochModel) -> Result<Vector3<f64>> {
    let rss = bloch.steady_state()?;
    if rss.norm() >= 1.0 - 1e-9 {
        return Err(Error::DegenerateSteadyState { norm: rss.norm() });
    }
    Ok(rss)
}

/// One two-state PR ensemble per real eigenvector of `A`.
///
/// With `v̂` oriented so that `⟨r_ss, v̂⟩ ≤ 0`, the ensemble is
/// `r_1 = r_ss − v̂ √(1−|r_ss|²) √((1−wp_1)/wp_1)` (occupied with `wp_1 ≥ ½`)
/// and `r_2 = r_ss + v̂ √(1−|r_ss|²) √(wp_1/(1−wp_1))`, where
/// `wp_1 = ½(1 − ⟨r_ss,v̂⟩ / √(1 − |r_ss|² + ⟨r_ss,v̂⟩²))`, and the rates are
/// `κ_12 = (1−wp_1)|λ|`, `κ_21 = wp_1|λ|`.
pub fn two_state_qubit_ensembles(bloch: &BlochModel) -> Result<Vec<PREnsemble>> {
    let rss = mixed_steady_state(bloch)?;
    let mut pairs = bloch.real_eigenpairs();
    if pairs.is_empty() {
        return Err(Error::NoRealEigenvector);
    }
    pairs.sort_by(|p, q| q.value.total_cmp(&p.value));

    let spread = 1.0 - rss.norm_squared();
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut v = pair.vector.normalize();
        if rss.dot(&v) > 0.0 {
            v = -v;
        }
        let along = rss.dot(&v);
        let p1 = 0.5 * (1.0 - along / (spread + along * along).sqrt());
        let p2 = 1.0 - p1;
        let near = rss - v * (spread.sqrt() * (p2 / p1).sqrt());
        let far = rss + v * (spread.sqrt() * (p1 / p2).sqrt());
        let decay = pair.value.abs();
        let rates = DMatrix::from_row_slice(2, 2, &[0.0, p2 * decay, p1 * decay, 0.0]);
        let states = vec![near, far];
        let residual = pr_residual(bloch, &states, &rates);
        let probs = vec![p1, p2];
        let entropy_bits = shannon_entropy(&probs)?;
        out.push(PREnsemble { states, probs, rates, entropy_bits, residual, eigenvalue: Some(pair.value) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn fluorescence(gamma: f64, omega: f64) -> BlochModel {
        BlochModel::new(
            Matrix3::new(-gamma / 2.0, 0.0, 0.0, 0.0, -gamma / 2.0, -omega, 0.0, omega, -gamma),
            Vector3::new(0.0, 0.0, gamma),
        )
    }

    #[test]
    fn symmetric_two_state_chain() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]);
        let p = stationary_probs_from_rates(&r).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn general_two_state_chain() {
        let (k12, k21) = (0.3, 1.7);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, k12, k21, 0.0]);
        let p = stationary_probs_from_rates(&r).unwrap();
        assert!((p[0] - k21 / (k12 + k21)).abs() < 1e-15);
    }

    #[test]
    fn three_cycle_occupation_is_inverse_rate() {
        let k = [0.4, 2.0, 0.9];
        let mut r = DMatrix::zeros(3, 3);
        for j in 0..3 {
            r[(j, (j + 1) % 3)] = k[j];
        }
        let p = stationary_probs_from_rates(&r).unwrap();
        let norm: f64 = k.iter().map(|x| 1.0 / x).sum();
        for j in 0..3 {
            assert!((p[j] - 1.0 / k[j] / norm).abs() < 1e-14);
        }
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let r = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(stationary_probs_from_rates(&r), Err(Error::Reducible)));
    }

    #[test]
    fn shannon_entropy_edges() {
        assert_eq!(shannon_entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert!(shannon_entropy(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn dof_counts() {
        assert_eq!(dof_count(2, 2).unwrap(), DofCount { constraints: 8, unknowns: 8, underdetermined: false });
        assert_eq!(dof_count(2, 3).unwrap(), DofCount { constraints: 12, unknowns: 15, underdetermined: true });
        assert_eq!(dof_count(3, 5).unwrap(), DofCount { constraints: 45, unknowns: 45, underdetermined: false });
        assert!(dof_count(1, 2).is_err());
    }

    #[test]
    fn pure_stationary_state_is_a_single_state_ensemble() {
        let bloch = fluorescence(1.0, 0.0);
        let check = check_pr(&bloch, &[Vector3::new(0.0, 0.0, 1.0)], 1e-12).unwrap();
        assert!(check.feasible);
        assert_eq!(check.residual, 0.0);
        assert!(matches!(two_state_qubit_ensembles(&bloch), Err(Error::DegenerateSteadyState { .. })));
    }

    #[test]
    fn non_unit_states_are_rejected() {
        let bloch = fluorescence(1.0, 0.2);
        let r = check_pr(&bloch, &[Vector3::new(0.0, 0.0, 0.9)], 1e-8);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn diagonal_ensemble_is_not_pr() {
        let bloch = fluorescence(1.0, 0.2);
        let rss = bloch.steady_state().unwrap();
        let axis = rss.normalize();
        let check = check_pr(&bloch, &[axis, -axis], default_pr_tolerance(&bloch)).unwrap();
        assert!(!check.feasible, "residual {}", check.residual);
        assert!(check.residual > 1e-3);
    }

    #[test]
    fn two_state_construction_is_consistent() {
        let bloch = fluorescence(1.0, 0.2);
        let rss = bloch.steady_state().unwrap();
        let ens = two_state_qubit_ensembles(&bloch).unwrap();
        assert_eq!(ens.len(), 3);
        for e in &ens {
            assert!(e.max_norm_error() < 1e-12);
            assert!(e.residual < 1e-12);
            assert!((e.mixture() - rss).amax() < 1e-12);
            assert!(e.probs[0] >= 0.5);
            let fit = check_pr(&bloch, &e.states, 1e-9).unwrap();
            assert!(fit.feasible);
            let lambda = e.eigenvalue.unwrap().abs();
            assert!((fit.rates[(1, 0)] / lambda - e.probs[0]).abs() < 1e-9);
            assert_eq!(stationary_probs_from_rates(&e.rates).unwrap().len(), 2);
        }
        // v1 = x̂ is orthogonal to r_ss: equal weights, one bit
        let v1 = ens.iter().find(|e| (e.eigenvalue.unwrap() + 0.5).abs() < 1e-12 && e.states[0].x.abs() > 0.05).unwrap();
        assert!((v1.probs[0] - 0.5).abs() < 1e-12);
        assert!((v1.entropy_bits - 1.0).abs() < 1e-12);
        assert!(v1.is_mirror_symmetric(1e-12));
    }

    #[test]
    fn mirror_symmetry_detection() {
        let e = PREnsemble {
            states: vec![Vector3::new(0.6, 0.0, 0.8), Vector3::new(0.0, 1.0, 0.0)],
            probs: vec![0.5, 0.5],
            rates: DMatrix::zeros(2, 2),
            entropy_bits: 1.0,
            residual: 0.0,
            eigenvalue: None,
        };
        assert!(!e.is_mirror_symmetric(1e-9));
        let mut both = e.clone();
        both.states[1] = Vector3::new(-0.6, 0.0, 0.8);
        assert!(both.is_mirror_symmetric(1e-9));
        assert_eq!(e.mirrored().states[0].x, -0.6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn two_state_ensembles_reproduce_steady_state(seed in proptest::prelude::any::<u64>()) {
            let bloch = crate::verify::random_qubit_models(1, seed).unwrap().remove(0);
            let rss = bloch.steady_state().unwrap();
            let tol = default_pr_tolerance(&bloch);
            for e in two_state_qubit_ensembles(&bloch).unwrap() {
                proptest::prop_assert!((e.mixture() - rss).norm() < 1e-9);
                proptest::prop_assert!(e.max_norm_error() < 1e-9);
                proptest::prop_assert!(e.pr_residual(&bloch) < tol);
                proptest::prop_assert!(e.rates.iter().all(|&k| k >= 0.0));
                let p = stationary_probs_from_rates(&e.rates).unwrap();
                proptest::prop_assert!((p[0] - e.probs[0]).abs() < 1e-9);
                proptest::prop_assert!(e.probs[0] >= 0.5 - 1e-12 || e.probs[1] >= 0.5 - 1e-12);
                proptest::prop_assert!(e.entropy_bits <= 1.0 + 1e-12);
            }
        }
    }
}
