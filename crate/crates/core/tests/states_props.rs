use bqt_core::analytic::gadc_twirled_error;
use bqt_core::qmat::PSD_TOL;
use bqt_core::random::{density, rng};
use bqt_core::states::{
    gadc_fidelity, gadc_state_operator, isotropic_state, isotropic_twirl, max_entangled, sym_antisym_projectors,
    werner_state, werner_twirl,
};
use bqt_core::ResourceState;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn check_materialized(r: &ResourceState) -> Result<(), TestCaseError> {
    let op = r.materialize().unwrap();
    prop_assert!(op.min_eigenvalue().unwrap() >= -PSD_TOL);
    prop_assert!((op.trace().re - 1.0).abs() <= 1e-12);
    prop_assert!(op.trace().im.abs() <= 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn materialized_states_are_states(f in unit(), p in unit(), gamma in unit(), n in unit(), da in 2usize..5) {
        check_materialized(&ResourceState::isotropic(f, da).unwrap())?;
        check_materialized(&ResourceState::werner(p, da).unwrap())?;
        check_materialized(&ResourceState::gadc(gamma, n).unwrap())?;
    }

    #[test]
    fn isotropic_twirl_lands_on_the_family(seed in any::<u64>(), d in 2usize..4) {
        let rho = density(&mut rng(seed), &[d, d]);
        let f = max_entangled(d, true).unwrap().inner(&rho).unwrap().re;
        let tw = isotropic_twirl(&rho).unwrap();
        prop_assert!(tw.max_abs_diff(&isotropic_state(f, d).unwrap()) <= 1e-10);
    }

    #[test]
    fn werner_twirl_lands_on_the_family(seed in any::<u64>(), d in 2usize..4) {
        let rho = density(&mut rng(seed), &[d, d]);
        let (_, anti) = sym_antisym_projectors(d).unwrap();
        let p = anti.inner(&rho).unwrap().re;
        let tw = werner_twirl(&rho).unwrap();
        prop_assert!(tw.max_abs_diff(&werner_state(p, d).unwrap()) <= 1e-10);
    }

    #[test]
    fn twirled_gadc_state_is_isotropic(gamma in unit(), n in unit()) {
        let op = gadc_state_operator(gamma, n).unwrap();
        let f = gadc_fidelity(gamma, n);
        let tw = isotropic_twirl(&op).unwrap();
        prop_assert!(tw.max_abs_diff(&isotropic_state(f, 4).unwrap()) <= 1e-10);
        prop_assert!((max_entangled(4, true).unwrap().inner(&op).unwrap().re - f).abs() <= 1e-12);
        prop_assert!((0.0..=0.75 + 1e-15).contains(&gadc_twirled_error(gamma, n).unwrap()));
    }
}
