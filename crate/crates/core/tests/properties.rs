use proptest::prelude::*;

use twirl_core::linalg::{hs_distance_sq, hs_norm_sq, tensor_power, unvec, vec};
use twirl_core::random::{haar_unitary, hs_random_density};
use twirl_core::superop::{exact_twirl_superop, mix_superop, superop_error};
use twirl_core::twirl::{build_permutation_basis, conjugate_state, exact_twirl, mix_step, twirl_step};
use twirl_core::{ComplexMatrix, QuditRegister, RngHandle, Superoperator, Variant};

fn register() -> impl Strategy<Value = QuditRegister> {
    prop_oneof![Just((1, 3)), Just((2, 2)), Just((2, 3)), Just((3, 2))]
        .prop_map(|(n, d)| QuditRegister::new(n, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn twirl_step_keeps_a_valid_state(reg in register(), seed in any::<u64>()) {
        let mut rng = RngHandle::new(seed, 0);
        let rho = hs_random_density(reg.dim(), &mut rng).unwrap();
        let u = haar_unitary(reg.local_dim, &mut rng).unwrap();
        let out = twirl_step(&rho, &u, reg).unwrap();
        prop_assert!(out.validate().is_ok());
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(out.purity() <= rho.purity() + 1e-12);
    }

    #[test]
    fn exact_twirl_is_an_invariant_projection(reg in register(), seed in any::<u64>()) {
        let mut rng = RngHandle::new(seed, 1);
        let basis = build_permutation_basis(reg).unwrap();
        let rho = hs_random_density(reg.dim(), &mut rng).unwrap();
        let p = exact_twirl(&rho, &basis).unwrap();
        prop_assert!(exact_twirl(&p, &basis).unwrap().matrix().max_abs_diff(p.matrix()) < 1e-12);
        let u = haar_unitary(reg.local_dim, &mut rng).unwrap();
        prop_assert!(conjugate_state(&p, &u, reg).unwrap().matrix().max_abs_diff(p.matrix()) < 1e-12);
        let rotated = conjugate_state(&rho, &u, reg).unwrap();
        prop_assert!(exact_twirl(&rotated, &basis).unwrap().matrix().max_abs_diff(p.matrix()) < 1e-12);
    }

    #[test]
    fn one_step_error_never_grows(reg in register(), seed in any::<u64>()) {
        let mut rng = RngHandle::new(seed, 2);
        let basis = build_permutation_basis(reg).unwrap();
        let rho = hs_random_density(reg.dim(), &mut rng).unwrap();
        let p = exact_twirl(&rho, &basis).unwrap();
        let u = haar_unitary(reg.local_dim, &mut rng).unwrap();
        let next = twirl_step(&rho, &u, reg).unwrap();
        let before = hs_distance_sq(rho.matrix(), p.matrix()).unwrap();
        let after = hs_distance_sq(next.matrix(), p.matrix()).unwrap();
        prop_assert!(after <= before + 1e-14);
        // Pythagoras: Pρ is orthogonal to the error
        let gap = hs_norm_sq(rho.matrix()).value() - hs_norm_sq(p.matrix()).value();
        prop_assert!((before - gap).abs() < 1e-12);
    }

    #[test]
    fn superoperator_sequence_reproduces_state_channel(
        reg in register(), seed in any::<u64>(), steps in 1usize..6, k in 2usize..4,
    ) {
        let mut rng = RngHandle::new(seed, 3);
        let rho = hs_random_density(reg.dim(), &mut rng).unwrap();
        let mut state = rho.clone();
        let mut s = Superoperator::identity(reg.n_qudits, reg.local_dim).unwrap();
        for _ in 0..steps {
            let us: Vec<ComplexMatrix> = (0..k - 1).map(|_| haar_unitary(reg.local_dim, &mut rng).unwrap()).collect();
            state = mix_step(&state, &us, reg, Variant::Werner).unwrap();
            s = mix_superop(&s, &us, reg, Variant::Werner).unwrap();
        }
        let via_superop = unvec(&s.matrix().apply(&vec(rho.matrix()).unwrap()).unwrap(), reg.dim()).unwrap();
        prop_assert!(via_superop.max_abs_diff(state.matrix()) < 1e-10);
        let s_p = exact_twirl_superop(reg, &build_permutation_basis(reg).unwrap()).unwrap();
        prop_assert!((superop_error(&s, &s_p).unwrap() - superop_error(&s_p, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn matrix_json_round_trip_is_exact(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = RngHandle::new(seed, 4);
        let u = haar_unitary(d.max(1), &mut rng).unwrap();
        let m = tensor_power(&u, 1).unwrap().scale_real(1e-7 + rng.uniform());
        prop_assert_eq!(ComplexMatrix::from_json(&m.to_json()).unwrap(), m);
    }
}
