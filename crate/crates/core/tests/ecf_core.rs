mod common;

use common::{perturbed, random_ecf, tau_oracle, theta_from_tau_oracle};
use ecf_toolkit::ecf::{
    compute_tau, compute_tau_direct, ecf_from_spectral_measure, ecf_from_tau, marginalize_tau,
    random_spectral_measure, validate_ecf, DiagnosticKind,
};
use ecf_toolkit::subset::{check_completely_alternating_direct, masks};
use ecf_toolkit::{DiscreteSpectralMeasure, EcfTable, Error, GroundSet, SetFunction, SubsetMask, TauTable, TOL_VALIDATE};
use proptest::prelude::*;

proptest! {
    #[test]
    fn tau_matches_oracle(seed in any::<u64>(), m in 1usize..=7) {
        let ecf = random_ecf(m, seed);
        let tau = compute_tau(&ecf).unwrap();
        let oracle = tau_oracle(ecf.theta());
        for l in masks(m, true) {
            prop_assert!((tau.get(l) - oracle[l.index()]).abs() < 1e-12);
            prop_assert!(tau.get(l) >= -TOL_VALIDATE);
        }
        for s in tau.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        let direct = compute_tau_direct(&ecf).unwrap();
        prop_assert!(direct.tau().max_abs_diff(tau.tau()) < 1e-12);
    }

    #[test]
    fn round_trip(seed in any::<u64>(), m in 1usize..=8) {
        let ecf = random_ecf(m, seed);
        let back = ecf_from_tau(&compute_tau(&ecf).unwrap()).unwrap();
        prop_assert!(back.theta().max_abs_diff(ecf.theta()) <= 1e-12);
        let oracle = theta_from_tau_oracle(compute_tau(&ecf).unwrap().tau().values());
        for a in masks(m, false) {
            prop_assert!((back.get(a) - oracle[a.index()]).abs() < 1e-12);
        }
    }

    #[test]
    fn marginalization_consistency(seed in any::<u64>(), m in 2usize..=7, sub in 1u32..128) {
        let ecf = random_ecf(m, seed);
        let a = SubsetMask((sub - 1) % ((1 << m) - 1) + 1);
        let via_tau = marginalize_tau(&compute_tau(&ecf).unwrap(), a).unwrap();
        let direct = compute_tau(&ecf.restrict(a).unwrap()).unwrap();
        prop_assert!(via_tau.tau().max_abs_diff(direct.tau()) <= 1e-12);
        prop_assert_eq!(via_tau.ground(), direct.ground());
    }

    #[test]
    fn spectral_measure_ecfs_are_valid(seed in any::<u64>(), m in 1usize..=8, q in 1usize..=12) {
        let sm = random_spectral_measure(m, q, seed).unwrap();
        let ecf = ecf_from_spectral_measure(&sm);
        prop_assert!(validate_ecf(&ecf).passed);
        for a in masks(m, true) {
            let direct: f64 = (0..sm.q()).map(|j| a.sites().map(|i| sm.coef(i, j)).fold(0.0, f64::max)).sum();
            prop_assert!((ecf.get(a) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_agrees_with_direct_check(seed in any::<u64>(), m in 2usize..=5, which in 1u32..32, up in any::<bool>()) {
        let ecf = random_ecf(m, seed);
        let a = SubsetMask((which - 1) % ((1 << m) - 1) + 1);
        for table in [ecf.clone(), perturbed(&ecf, a, if up { 0.05 } else { -0.05 })] {
            let v = validate_ecf(&table);
            let normalized = table.check_normalization(TOL_VALIDATE).is_ok();
            let direct = check_completely_alternating_direct(table.theta(), m, TOL_VALIDATE).unwrap().passed();
            prop_assert_eq!(v.passed, normalized && direct);
        }
    }
}

#[test]
fn sqrt_example() {
    let g = GroundSet::indexed(3).unwrap();
    let ecf = EcfTable::from_fn(g, |a| (a.len() as f64).sqrt());
    let tau = compute_tau(&ecf).unwrap();
    let (s2, s3) = (2f64.sqrt(), 3f64.sqrt());
    let expect = [s3 - s2, 2.0 * s2 - 1.0 - s3, 3.0 - 3.0 * s2 + s3];
    for l in masks(3, true) {
        assert!((tau.get(l) - expect[l.len() - 1]).abs() < 1e-12);
    }
    let m2 = marginalize_tau(&tau, SubsetMask(3)).unwrap();
    assert!((m2.get(SubsetMask(1)) - (s2 - 1.0)).abs() < 1e-12);
    assert!((m2.get(SubsetMask(3)) - (2.0 - s2)).abs() < 1e-12);
    assert!((ecf_from_tau(&m2).unwrap().get(SubsetMask(3)) - s2).abs() < 1e-12);
}

#[test]
fn extreme_tables() {
    let g = GroundSet::indexed(4).unwrap();
    let ind = compute_tau(&EcfTable::from_fn(g.clone(), |a| a.len() as f64)).unwrap();
    let dep = compute_tau(&EcfTable::from_fn(g, |a| f64::from(u8::from(!a.is_empty())))).unwrap();
    for l in masks(4, true) {
        assert_eq!(ind.get(l), if l.len() == 1 { 1.0 } else { 0.0 });
        assert_eq!(dep.get(l), if l == SubsetMask::full(4) { 1.0 } else { 0.0 });
    }
}

#[test]
fn invalid_tables_are_diagnosed() {
    let g = GroundSet::indexed(2).unwrap();
    let bad = EcfTable::from_fn(g.clone(), |a| match a.len() {
        0 => 0.0,
        1 => 1.0,
        _ => 2.5,
    });
    let v = validate_ecf(&bad);
    assert!(!v.passed);
    assert!(v.diagnostics.iter().any(|d| d.kind == DiagnosticKind::ExceedsCardinality));
    assert!(v.diagnostics.iter().any(|d| d.kind == DiagnosticKind::NegativeTau));
    assert!((v.min_tau + 0.5).abs() < 1e-15);

    let unnorm = EcfTable::from_fn(g.clone(), |a| a.len() as f64 * 1.1);
    assert!(matches!(compute_tau(&unnorm), Err(Error::Normalization { .. })));
    let v = validate_ecf(&unnorm);
    assert!(!v.passed && v.diagnostics.iter().any(|d| d.kind == DiagnosticKind::SingletonNotOne));

    let tau = TauTable::new_unchecked(g.clone(), SetFunction::new(2, vec![0.0, 1.2, 1.0, -0.2]).unwrap()).unwrap();
    assert!(matches!(ecf_from_tau(&tau), Err(Error::InvalidTau(_))));
    assert!(DiscreteSpectralMeasure::new(g, vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
}
