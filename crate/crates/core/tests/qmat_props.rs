use bqt_core::random::{density, ginibre, pure_vector, rng};
use bqt_core::{state_fidelity, LabeledOperator, C64};
use proptest::prelude::*;

fn random_unitary(seed: u64, n: usize) -> LabeledOperator {
    let mut g = rng(seed);
    let a = LabeledOperator::new(ginibre(&mut g, n, n), vec![n]).unwrap();
    let h = a.add(&a.adjoint()).unwrap();
    let (_, v) = h.eigh().unwrap();
    LabeledOperator::from_faer(&v, &[n])
}

fn random_matrix(seed: u64, dims: &[usize]) -> LabeledOperator {
    let n = dims.iter().product();
    LabeledOperator::new(ginibre(&mut rng(seed), n, n), dims.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_transpose_is_an_involution(seed in any::<u64>(), mask in 1u8..8) {
        let x = random_matrix(seed, &[2, 3, 2]);
        let on: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let back = x.ptranspose(&on).unwrap().ptranspose(&on).unwrap();
        prop_assert_eq!(back.data(), x.data());
    }

    #[test]
    fn partial_transpose_commutes_with_partial_trace(seed in any::<u64>(), t in 0usize..3, r in 0usize..3) {
        prop_assume!(t != r);
        let x = random_matrix(seed, &[2, 3, 2]);
        let lhs = x.ptranspose(&[t]).unwrap().ptrace(&[r]).unwrap();
        // index of t once r is gone
        let t2 = if t > r { t - 1 } else { t };
        let rhs = x.ptrace(&[r]).unwrap().ptranspose(&[t2]).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn trace_of_kron_factorizes(seed in any::<u64>(), na in 1usize..4, nb in 1usize..4) {
        let a = random_matrix(seed, &[na]);
        let b = random_matrix(seed ^ 0x5555, &[nb]);
        let lhs = a.kron(&b).trace();
        let rhs = a.trace() * b.trace();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn trace_norm_triangle_and_unitary_invariance(seed in any::<u64>(), n in 2usize..5) {
        let a = random_matrix(seed, &[n]);
        let b = random_matrix(seed.wrapping_add(1), &[n]);
        let (na, nb) = (a.trace_norm().unwrap(), b.trace_norm().unwrap());
        prop_assert!(a.add(&b).unwrap().trace_norm().unwrap() <= na + nb + 1e-10);
        let u = random_unitary(seed.wrapping_add(2), n);
        let v = random_unitary(seed.wrapping_add(3), n);
        let rotated = u.matmul(&a).unwrap().matmul(&v).unwrap();
        prop_assert!((rotated.trace_norm().unwrap() - na).abs() <= 1e-10 * (1.0 + na));
    }

    #[test]
    fn fidelity_is_bounded(seed in any::<u64>(), n in 2usize..5) {
        let mut g = rng(seed);
        let f = state_fidelity(&density(&mut g, &[n]), &density(&mut g, &[n])).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap(seed in any::<u64>(), n in 2usize..5) {
        let mut g = rng(seed);
        let (psi, phi) = (pure_vector(&mut g, n), pure_vector(&mut g, n));
        let overlap: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
        let f = state_fidelity(
            &LabeledOperator::projector(&[n], &psi).unwrap(),
            &LabeledOperator::projector(&[n], &phi).unwrap(),
        ).unwrap();
        prop_assert!((f - overlap.norm_sqr()).abs() <= 1e-8, "{} vs {}", f, overlap.norm_sqr());
    }
}
