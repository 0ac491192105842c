use nalgebra::Vector3;
use proptest::prelude::*;
use qtrack::bloch::{density_to_bloch, to_bloch};
use qtrack::ensemble::{check_pr, two_state_qubit_ensembles, PREnsemble};
use qtrack::fluorescence::{build_fluorescence_me, omega_from_epsilon};
use qtrack::lindblad::{apply_liouvillian, DensityMatrix, MasterEquation};
use qtrack::linalg::{self, c, CMatrix, CVector};
use qtrack::search::{cyclic_k_state_search, SearchOptions};
use qtrack::unravel::{
    backout_beta, bloch_to_statevector, decompose_jump_action, scheme_for_ensemble, transform_me, UnravellingTransform,
};

fn fluorescence(eps: f64) -> MasterEquation {
    build_fluorescence_me(1.0, omega_from_epsilon(1.0, eps)).unwrap()
}

fn all_ensembles(eps: f64) -> Vec<PREnsemble> {
    let me = fluorescence(eps);
    let bloch = to_bloch(&me).unwrap();
    let mut out = two_state_qubit_ensembles(&bloch).unwrap();
    out.extend(cyclic_k_state_search(&bloch, 3, SearchOptions { n_starts: 400, seed: 9 }).unwrap().ensembles);
    out
}

#[test]
fn v1_decomposition_reconstructs_jump_action() {
    let me = fluorescence(0.04);
    let bloch = to_bloch(&me).unwrap();
    let v1 = two_state_qubit_ensembles(&bloch)
        .unwrap()
        .into_iter()
        .find(|e| (e.probs[0] - 0.5).abs() < 1e-12)
        .unwrap();
    let phi: Vec<CVector> = v1.states.iter().map(|r| bloch_to_statevector(r).unwrap()).collect();
    let jump = &me.jump_ops()[0];
    for k in 0..2 {
        let (a, b) = decompose_jump_action(jump, &phi[k], &phi[1 - k]).unwrap();
        let rebuilt = &phi[k] * a + &phi[1 - k] * b;
        assert!((jump * &phi[k] - rebuilt).norm() < 1e-10);
    }
    let scheme = scheme_for_ensemble(&me, &v1).unwrap();
    assert!(scheme.betas.iter().all(|b| b.norm() > 1e-3 && b.norm().is_finite()));
}

#[test]
fn schemes_close_their_cycles_at_reference_powers() {
    for eps in [0.04, 0.05] {
        let me = fluorescence(eps);
        let bloch = to_bloch(&me).unwrap();
        let ensembles = all_ensembles(eps);
        assert!(ensembles.len() >= 3);
        for e in &ensembles {
            let scheme = scheme_for_ensemble(&me, e).unwrap();
            assert!(scheme.max_residual() < 1e-9, "ε = {eps}: residual {}", scheme.max_residual());
            let fit = check_pr(&bloch, &e.states, 1e-9).unwrap();
            for k in 0..e.k() {
                let kappa = fit.rates[(k, (k + 1) % e.k())];
                assert!((scheme.jump_rates[k] / kappa - 1.0).abs() < 1e-6, "ε = {eps}: {} vs {kappa}", scheme.jump_rates[k]);
            }
        }
    }
}

#[test]
fn reversed_cycle_is_rejected() {
    let me = fluorescence(0.05);
    let bloch = to_bloch(&me).unwrap();
    let e = cyclic_k_state_search(&bloch, 3, SearchOptions { n_starts: 200, seed: 1 }).unwrap().ensembles.remove(0);
    let mut cycle: Vec<CVector> = e.states.iter().map(|r| bloch_to_statevector(r).unwrap()).collect();
    cycle.reverse();
    assert!(backout_beta(&me, &cycle).is_err());
}

fn arb_complex() -> impl Strategy<Value = linalg::C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b))
}

fn arb_matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec(arb_complex(), d * d).prop_map(move |v| CMatrix::from_vec(d, d, v))
}

fn arb_model() -> impl Strategy<Value = MasterEquation> {
    (2usize..=3, 1usize..=2).prop_flat_map(|(d, l)| {
        (arb_matrix(d), proptest::collection::vec(arb_matrix(d), l))
            .prop_map(|(h, ops)| MasterEquation::new(linalg::hermitize(&h), ops).unwrap())
    })
}

/// Random isometry M × L from the QR factor of a random complex matrix.
fn arb_transform(l: usize) -> impl Strategy<Value = UnravellingTransform> {
    (l..=3).prop_flat_map(move |m| {
        (arb_matrix(m), proptest::collection::vec(arb_complex(), m)).prop_map(move |(g, beta)| {
            let q = (g + CMatrix::identity(m, m) * c(2.0, 0.0)).qr().q();
            UnravellingTransform::new(q.columns(0, l).into_owned(), beta).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unravelling_transforms_keep_the_liouvillian(
        (me, t) in arb_model().prop_flat_map(|me| { let l = me.jump_ops().len(); (Just(me), arb_transform(l)) })
    ) {
        let out = transform_me(&me, &t).unwrap();
        let d = me.dim();
        for i in 0..d {
            for j in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = c(1.0, 0.0);
                let gap = apply_liouvillian(&me, &e).unwrap() - apply_liouvillian(&out, &e).unwrap();
                prop_assert!(linalg::max_abs(&gap) < 1e-9);
            }
        }
    }

    #[test]
    fn statevector_round_trip(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU) {
        let r = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let psi = bloch_to_statevector(&r).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-14);
        let first = psi.iter().find(|z| z.norm() > 1e-12).unwrap();
        prop_assert!(first.im.abs() < 1e-15 && first.re > 0.0);
        let back = density_to_bloch(&DensityMatrix::pure(&psi)).unwrap();
        prop_assert!((back - r).amax() < 1e-12);
    }
}
