use physvac::geometry::{piola_residual, snapshot, FlowState, GeometrySnapshot, VectorField, ZERO3};
use physvac::grid::DiscreteDomain;
use physvac::hardy::{hardy_ratio, kelliptic_solve};
use physvac::vacuum::{density_profile, ProfileKind};
use proptest::prelude::*;

fn matrix(dim: usize, entries: &[f64]) -> [[f64; 3]; 3] {
    let mut m = ZERO3;
    for r in 0..dim {
        for s in 0..dim {
            m[r][s] = entries[r * 3 + s] + if r == s { 1.0 } else { 0.0 };
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cofactor_identity_for_affine_maps(
        dim in 1usize..=3,
        entries in prop::collection::vec(-0.3f64..0.3, 9),
    ) {
        let d = DiscreteDomain::new(dim, 6, 7).unwrap();
        let m = matrix(dim, &entries);
        let eta = VectorField::affine(&d, &m, &[0.1, -0.2, 0.3]);
        let snap = GeometrySnapshot::from_map(&d, &eta).unwrap();
        prop_assert!(snap.cofactor_identity_error() < 1e-12);
    }

    #[test]
    fn piola_vanishes_for_affine_maps(
        dim in 2usize..=3,
        entries in prop::collection::vec(-0.3f64..0.3, 9),
    ) {
        let d = DiscreteDomain::new(dim, 6, 7).unwrap();
        let m = matrix(dim, &entries);
        let state = FlowState { eta: VectorField::affine(&d, &m, &[0.0; 3]), ..FlowState::initial(&d, VectorField::zeros(&d)) };
        let snap = snapshot(&d, &state).unwrap();
        let r = piola_residual(&d, &snap).unwrap();
        prop_assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn derivative_is_linear(
        a in -3.0f64..3.0,
        seed_u in prop::collection::vec(-1.0f64..1.0, 33),
        seed_w in prop::collection::vec(-1.0f64..1.0, 33),
        order in 1usize..=2,
    ) {
        let d = DiscreteDomain::new(1, 0, 33).unwrap();
        let combo: Vec<f64> = seed_u.iter().zip(&seed_w).map(|(u, w)| a * u + w).collect();
        let du = d.diff(&seed_u, 0, order).unwrap();
        let dw = d.diff(&seed_w, 0, order).unwrap();
        let dc = d.diff(&combo, 0, order).unwrap();
        for i in 0..33 {
            prop_assert!((dc[i] - (a * du[i] + dw[i])).abs() < 1e-9 * (1.0 + dc[i].abs()));
        }
    }

    #[test]
    fn hardy_ratio_scale_invariant(c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], s in 1usize..=3) {
        let d = DiscreteDomain::new(1, 0, 65).unwrap();
        let mut u = d.sample(|x| (std::f64::consts::PI * x[0]).sin() * (1.0 + x[0]));
        u[0] = 0.0;
        u[64] = 0.0;
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let a = hardy_ratio(&d, &u, s).unwrap().ratio;
        let b = hardy_ratio(&d, &cu, s).unwrap().ratio;
        prop_assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kelliptic_max_bound(
        f0 in -5.0f64..5.0,
        g0 in -5.0f64..5.0,
        w in 0.0f64..30.0,
        kappa in 1e-3f64..2.0,
        dt in 1e-3f64..0.2,
    ) {
        let s = kelliptic_solve(&[f0], &|t| vec![g0 * (w * t).cos()], kappa, dt, 1.0).unwrap();
        prop_assert!(s.bound_constant() <= 1.0 + 1e-12);
    }

    #[test]
    fn kelliptic_commutes_with_restriction(
        f in prop::collection::vec(-2.0f64..2.0, 4),
        g in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let gg = g.clone();
        let whole = kelliptic_solve(&f, &move |_| gg.clone(), 0.3, 0.05, 0.5).unwrap();
        for i in 0..4 {
            let gi = g[i];
            let one = kelliptic_solve(&[f[i]], &move |_| vec![gi], 0.3, 0.05, 0.5).unwrap();
            for (a, b) in whole.values.iter().zip(&one.values) {
                prop_assert_eq!(a[i], b[0]);
            }
        }
    }

    #[test]
    fn parabolic_profiles_pass_the_gate(c in 0.1f64..5.0, gamma in 1.2f64..3.5, modulation in 0.0f64..0.5) {
        let d = DiscreteDomain::new(2, 8, 65).unwrap();
        let p = density_profile(ProfileKind::Parabolic { c, modulation }, gamma, &d).unwrap();
        prop_assert!(p.vacuum.constant > 0.0);
        prop_assert!(p.vacuum.max_exponent < 1.5);
    }
}
