use physvac::geometry::{FlowState, VectorField};
use physvac::grid::DiscreteDomain;
use physvac::hardy::{weighted_embedding_ratio, HardyError};
use physvac::kappa::Trajectory;
use physvac::parabolic::{
    consistency_check, decay_problem, manufactured_problem, solve_x, solve_x_galerkin, XError,
};
use physvac::vacuum::{density_profile, DensityProfile, ProfileKind};

fn unit_profile(d: &DiscreteDomain, gamma: f64) -> DensityProfile {
    density_profile(ProfileKind::Parabolic { c: 1.0, modulation: 0.0 }, gamma, d).unwrap()
}

#[test]
fn embedding_ratio_bounded_for_inverse_root_distance() {
    let mut ratios = vec![];
    for n in [65usize, 129, 257, 513, 1025] {
        let d = DiscreteDomain::new(1, 0, n).unwrap();
        let h = d.spacing(0);
        let f: Vec<f64> = (0..n).map(|i| 1.0 / d.distance_to_boundary(i).max(h).sqrt()).collect();
        ratios.push(weighted_embedding_ratio(&d, &f, 1).unwrap().ratio);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    assert!(max / min < 3.0, "{ratios:?}");
    assert!(matches!(
        weighted_embedding_ratio(&DiscreteDomain::new(1, 0, 9).unwrap(), &[0.0; 9], 3),
        Err(HardyError::BadExponent(3))
    ));
}

#[test]
fn galerkin_and_finite_differences_agree_on_decay() {
    let d = DiscreteDomain::new(1, 0, 257).unwrap();
    let p = unit_profile(&d, 2.0);
    let mut x0 = d.sample(|x| (std::f64::consts::PI * x[0]).sin().powi(2) * x[0]);
    x0[0] = 0.0;
    x0[256] = 0.0;
    let prob = decay_problem(&d, &p, 0.05, x0).unwrap();
    let fd = solve_x(&d, &prob, 2e-3, 0.2).unwrap();
    let ga = solve_x_galerkin(&d, &prob, 24, 2e-3, 0.2).unwrap();
    let a = fd.x.last().unwrap();
    let b = ga.x.last().unwrap();
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-2 * scale, "{diff} vs {scale}");
    assert!(ga.weighted_energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn manufactured_solution_in_two_dimensions() {
    let d = DiscreteDomain::new(2, 8, 33).unwrap();
    let p = unit_profile(&d, 2.0);
    let (prob, exact) = manufactured_problem(&d, &p, 0.1).unwrap();
    let s = solve_x(&d, &prob, 1e-3, 0.2).unwrap();
    let ex = exact(0.2);
    let err = s.x.last().unwrap().iter().zip(&ex).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-4, "{err}");
}

#[test]
fn rest_state_is_not_a_stationary_solution() {
    // the frozen identity map with zero velocity leaves the pressure term,
    // so the heat-equation residual must be visibly nonzero
    let d = DiscreteDomain::new(1, 0, 65).unwrap();
    let p = unit_profile(&d, 2.0);
    let samples: Vec<FlowState> = (0..3)
        .map(|k| FlowState { time: 0.01 * k as f64, ..FlowState::initial(&d, VectorField::zeros(&d)) })
        .collect();
    let traj = Trajectory { domain: d.clone(), samples, reports: vec![], kappa: 0.0, steps: 2 };
    let r = consistency_check(&traj, &p, 0.0).unwrap();
    // -2 (rho0),_xx = 4 for rho0 = x (1 - x), weighted by sqrt(rho0)
    let expected = (16.0_f64 / 6.0).sqrt();
    assert!(r.iter().all(|v| (v - expected).abs() < 0.05 * expected), "{r:?}");

    let p14 = unit_profile(&d, 1.4);
    assert!(matches!(consistency_check(&traj, &p14, 0.0), Err(XError::UnsupportedGamma(_))));
}
