mod common;

use std::time::Instant;

use common::{maxlinear_ell, maxlinear_neg_log_cdf, random_ecf, Lcg};
use ecf_toolkit::depset::{
    contains, enumerate_vertices, enumerate_vertices_exhaustive, fdd_lower_bound_log, halfspaces_from_ecf,
    inclusion_check, support_function, touches_plane, trivariate_bound_from_bivariate_log,
};
use ecf_toolkit::ecf::{ecf_from_spectral_measure, random_spectral_measure};
use ecf_toolkit::models::{ball_ell, hr_bivariate_neg_log_cdf, hr_dependency_boundary_point, sqrt_ecf};
use ecf_toolkit::subset::masks;
use ecf_toolkit::tm::{stable_tail_dependence, tm_from_ecf, tm_neg_log_cdf};
use ecf_toolkit::{DepSetPolytope, EcfTable, GroundSet, SubsetMask};
use proptest::prelude::*;

fn direction(rng: &mut Lcg, m: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..m).map(|_| if rng.next_f64() < 0.2 { 0.0 } else { 3.0 * rng.next_f64() }).collect();
    if x.iter().all(|&v| v == 0.0) {
        x[rng.below(m)] = 1.0;
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn support_function_is_tm_tail_dependence(seed in any::<u64>(), m in 1usize..=5) {
        let ecf = random_ecf(m, seed);
        let poly = DepSetPolytope::from_ecf(&ecf).unwrap();
        let p = tm_from_ecf(&ecf).unwrap();
        let mut rng = Lcg(seed);
        for _ in 0..50 {
            let x = direction(&mut rng, m);
            prop_assert!((support_function(&poly, &x).unwrap() - stable_tail_dependence(&p, &x).unwrap()).abs() <= 1e-9);
        }
        for a in masks(m, true) {
            let v = touches_plane(&poly, a).unwrap();
            prop_assert!((a.sites().map(|t| v[t]).sum::<f64>() - ecf.get(a)).abs() <= 1e-9);
        }
    }

    #[test]
    fn sandwich(seed in any::<u64>(), m in 1usize..=5) {
        let poly = DepSetPolytope::from_ecf(&random_ecf(m, seed)).unwrap();
        let cross: Vec<Vec<f64>> = (0..m).map(|t| (0..m).map(|s| f64::from(u8::from(s == t))).collect()).collect();
        prop_assert!(inclusion_check(&cross, &poly).passed);
        prop_assert!(contains(&poly, &vec![0.0; m]));
        for v in &poly.vertices {
            prop_assert!(v.iter().all(|&c| (-1e-9..=1.0 + 1e-9).contains(&c)));
            prop_assert!(contains(&poly, v));
        }
    }

    #[test]
    fn maxlinear_sets_lie_inside(seed in any::<u64>(), m in 1usize..=4, q in 1usize..=8) {
        let sm = random_spectral_measure(m, q, seed).unwrap();
        let ecf = ecf_from_spectral_measure(&sm);
        let p = tm_from_ecf(&ecf).unwrap();
        let mut rng = Lcg(seed);
        for _ in 0..50 {
            let x = direction(&mut rng, m);
            prop_assert!(maxlinear_ell(&sm, &x) <= stable_tail_dependence(&p, &x).unwrap() + 1e-12);
            let pt: Vec<f64> = (0..m).map(|_| 0.05 + 5.0 * rng.next_f64()).collect();
            let bound = fdd_lower_bound_log(&ecf, &pt).unwrap();
            prop_assert!(-maxlinear_neg_log_cdf(&sm, &pt) >= bound - 1e-12);
            prop_assert!((bound + tm_neg_log_cdf(&p, &pt).unwrap()).abs() <= 1e-12);
        }
        // ℓ of a max-linear vector is the support function of Σ_j conv{a_ij e_i},
        // so every choice of one site per atom gives a point of its dependency set.
        let poly = DepSetPolytope::from_ecf(&ecf).unwrap();
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let mut y = vec![0.0; m];
                for j in 0..sm.q() {
                    let i = rng.below(m);
                    y[i] += sm.coef(i, j);
                }
                y
            })
            .collect();
        prop_assert!(inclusion_check(&pts, &poly).passed);
    }

    #[test]
    fn trivariate_bound_is_weaker(seed in any::<u64>()) {
        let ecf = random_ecf(3, seed);
        let eta = |a: u32| ecf.get(SubsetMask(a)) - 1.0;
        let mut rng = Lcg(seed);
        for _ in 0..50 {
            let x = [0.05 + 4.0 * rng.next_f64(), 0.05 + 4.0 * rng.next_f64(), 0.05 + 4.0 * rng.next_f64()];
            // (r, s, t) = sites (0, 1, 2).
            let tri = trivariate_bound_from_bivariate_log(eta(0b011), eta(0b110), eta(0b101), x).unwrap();
            let full = fdd_lower_bound_log(&ecf, &x).unwrap();
            prop_assert!(full >= tri - 1e-12 * tri.abs().max(1.0));
        }
    }
}

#[test]
fn double_description_matches_exhaustive_oracle() {
    for seed in 0..40 {
        let m = 2 + seed as usize % 4;
        let ecf = random_ecf(m, 900 + seed);
        let hs = halfspaces_from_ecf(&ecf).unwrap();
        let a = enumerate_vertices(&hs, m).unwrap();
        let b = enumerate_vertices_exhaustive(&hs, m).unwrap();
        assert_eq!(a.len(), b.len(), "seed {seed}");
        for u in &a {
            assert!(b.iter().any(|v| u.iter().zip(v).all(|(x, y)| (x - y).abs() < 1e-9)));
        }
    }
}

#[test]
fn six_sites_enumerate_quickly() {
    let start = Instant::now();
    for seed in 0..5 {
        let ecf = random_ecf(6, 70 + seed);
        let poly = DepSetPolytope::from_ecf(&ecf).unwrap();
        let p = tm_from_ecf(&ecf).unwrap();
        let mut rng = Lcg(seed);
        for _ in 0..20 {
            let x = direction(&mut rng, 6);
            assert!((support_function(&poly, &x).unwrap() - stable_tail_dependence(&p, &x).unwrap()).abs() <= 1e-9);
        }
    }
    let sqrt6 = DepSetPolytope::from_ecf(&sqrt_ecf(&GroundSet::indexed(6).unwrap())).unwrap();
    assert!(sqrt6.vertices.len() > 64);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn positive_ball_lies_inside_sqrt_polytope() {
    let poly = DepSetPolytope::from_ecf(&sqrt_ecf(&GroundSet::indexed(3).unwrap())).unwrap();
    let mut rng = Lcg(17);
    let mut pts = Vec::new();
    while pts.len() < 1000 {
        let v: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
        let r = ball_ell(&v).unwrap();
        if r > 1e-3 && r <= 1.0 {
            pts.push(v.iter().map(|c| c / r).collect::<Vec<f64>>());
        }
    }
    assert!(inclusion_check(&pts, &poly).passed);
    // The ball is strictly smaller: its support function never exceeds the polytope's.
    for p in &pts {
        assert!(ball_ell(p).unwrap() <= support_function(&poly, p).unwrap() + 1e-12);
    }
    for a in masks(3, true) {
        let k = (a.len() as f64).sqrt();
        let x: Vec<f64> = (0..3).map(|t| if a.contains(t) { 1.0 / k } else { 0.0 }).collect();
        assert!(contains(&poly, &x));
    }
}

#[test]
fn husler_reiss_boundary_inside_tm_polytope() {
    for gamma in [0.1, 0.7, 2.0, 8.0, 30.0] {
        let theta = 2.0 * hr_bivariate_neg_log_cdf(gamma, 2.0, 2.0).unwrap();
        let ecf = EcfTable::from_fn(GroundSet::indexed(2).unwrap(), |a| match a.len() {
            0 => 0.0,
            1 => 1.0,
            _ => theta,
        });
        let poly = DepSetPolytope::from_ecf(&ecf).unwrap();
        let pts: Vec<Vec<f64>> = (0..=200)
            .map(|k| {
                let phi = std::f64::consts::FRAC_PI_2 * k as f64 / 200.0;
                hr_dependency_boundary_point(gamma, [phi.cos(), phi.sin()]).unwrap().to_vec()
            })
            .collect();
        let rep = inclusion_check(&pts, &poly);
        assert!(rep.passed, "gamma {gamma}: {}", rep.max_violation);
        // The diagonal boundary point touches the plane of the pair.
        let mid = hr_dependency_boundary_point(gamma, [1.0, 1.0]).unwrap();
        assert!((mid[0] + mid[1] - theta).abs() < 1e-12);
    }
}
