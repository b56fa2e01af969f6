use physvac::geometry::{Mat3, VectorField, ZERO3};
use physvac::grid::DiscreteDomain;
use physvac::harness::oracle::affine_oracle_kappa;
use physvac::kappa::{run, SolverConfig, SolverError};
use physvac::vacuum::{density_profile, DensityProfile, ProfileKind};

fn profile(d: &DiscreteDomain, gamma: f64) -> DensityProfile {
    density_profile(ProfileKind::Parabolic { c: 1.0, modulation: 0.1 }, gamma, d).unwrap()
}

#[test]
fn affine_flow_with_kappa_matches_reference() {
    let d = DiscreteDomain::new(1, 0, 257).unwrap();
    let p = density_profile(ProfileKind::Parabolic { c: 1.0, modulation: 0.0 }, 2.0, &d).unwrap();
    let kappa = 0.02;
    let cfg = SolverConfig { kappa, t_end: 0.2, snapshot_stride: 1, ..Default::default() };
    let u0 = VectorField::from_fn(&d, |x| [0.4 * (x[0] - 0.5), 0.0, 0.0]);
    let tr = run(&d, u0, &p, &cfg).unwrap();
    let o = affine_oracle_kappa(1.0, kappa, 1.0, 0.4, 0.2, 1e-4).unwrap();
    for s in &tr.samples {
        let e = o.eta(&d, s.time).unwrap();
        assert!(s.eta.plus(-1.0, &e).l2_norm(&d) / e.l2_norm(&d) < 1e-5, "t = {}", s.time);
    }
}

#[test]
fn runs_are_bit_identical() {
    let d = DiscreteDomain::new(2, 16, 17).unwrap();
    let p = profile(&d, 2.0);
    let u0 = VectorField::from_fn(&d, |x| [0.1 * (6.0 * x[0]).sin(), 0.05 * x[1], 0.0]);
    let cfg = SolverConfig { kappa: 1e-3, t_end: 0.05, snapshot_stride: 2, ..Default::default() };
    let a = run(&d, u0.clone(), &p, &cfg).unwrap();
    let b = run(&d, u0, &p, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn horizontal_rotation_keeps_unit_jacobian() {
    let d = DiscreteDomain::new(3, 8, 9).unwrap();
    let th: f64 = 0.3;
    let mut m: Mat3 = ZERO3;
    m[0][0] = th.cos();
    m[0][1] = -th.sin();
    m[1][0] = th.sin();
    m[1][1] = th.cos();
    m[2][2] = 1.0;
    let eta = VectorField::affine(&d, &m, &[0.0; 3]);
    let snap = physvac::geometry::GeometrySnapshot::from_map(&d, &eta).unwrap();
    assert!(snap.j.iter().all(|j| (j - 1.0).abs() < 1e-12));
}

#[test]
fn gamma_mismatch_and_bad_config_abort_at_start() {
    let d = DiscreteDomain::new(1, 0, 17).unwrap();
    let p = profile(&d, 1.4);
    let cfg = SolverConfig { gamma: 2.0, ..Default::default() };
    let err = run(&d, VectorField::zeros(&d), &p, &cfg).unwrap_err();
    assert!(matches!(err.error, SolverError::GammaMismatch { .. }));
    assert_eq!(err.partial.samples.len(), 1);
    let cfg = SolverConfig { gamma: 1.4, cfl: 2.0, ..Default::default() };
    assert!(matches!(run(&d, VectorField::zeros(&d), &p, &cfg).unwrap_err().error, SolverError::Config(_)));
}

#[test]
fn abort_keeps_last_good_state() {
    let d = DiscreteDomain::new(1, 0, 17).unwrap();
    let p = profile(&d, 2.0);
    let cfg = SolverConfig { max_steps: 4, snapshot_stride: 100, t_end: 1.0, ..Default::default() };
    let err = run(&d, VectorField::zeros(&d), &p, &cfg).unwrap_err();
    assert_eq!(err.steps, 4);
    assert!(err.time > 0.0);
    assert_eq!(err.partial.last().time, err.time);
}

#[test]
fn general_gamma_runs_expand_into_vacuum() {
    for gamma in [1.4, 3.0] {
        let d = DiscreteDomain::new(1, 0, 65).unwrap();
        let p = profile(&d, gamma);
        let cfg = SolverConfig { gamma, t_end: 0.1, ..Default::default() };
        let tr = run(&d, VectorField::zeros(&d), &p, &cfg).unwrap();
        let top = tr.last().eta.comps[0][64];
        assert!(top > 1.0, "gamma {gamma}: boundary at {top}");
        assert!(tr.reports.iter().all(|r| r.j_min > 0.0));
    }
}
