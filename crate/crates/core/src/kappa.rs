//! Time integration of the kappa-regularized Lagrangian Euler system
//!
//! ```text
//! rho0 v_t + w + kappa d/dt w = 0,   w_i = a[k][i] D_k(rho0^gamma J^-gamma),
//! ```
//!
//! with `kappa = 0` giving the compressible Euler equations. The solver works
//! with the specific force `q = w / rho0 = gamma/(gamma-1) A[k][i] D_k G`,
//! `G = rho0^(gamma-1) J^(1-gamma)`, which stays finite on the vacuum boundary.
//!
//! Writing `m = v + kappa q(eta)` turns the system into `m_t = -q(eta)`,
//! `eta_t = m - kappa q(eta)`. A step is a half kick of `m`, a midpoint drift
//! of `eta`, and a second half kick. Eliminating `m` gives the lagged-force
//! difference
//!
//! ```text
//! (v^{n+1} - v^n)/dt + (q^n + q^{n+1})/2 + kappa (q^{n+1} - q^n)/dt = 0,
//! ```
//!
//! which is second order and reduces to velocity Verlet when `kappa = 0`.

use crate::diagnostics::{attach_reports, EnergyReport};
use crate::geometry::{FlowState, GeometrySnapshot, VectorField};
use crate::grid::{DiscreteDomain, GridError, ScalarField};
use crate::vacuum::DensityProfile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor on the sound speed in the acoustic time-step bound.
pub const SOUND_SPEED_FLOOR: f64 = 1e-12;
/// Floor on `2 kappa c^2` in the parabolic time-step bound.
pub const DIFFUSIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("flow map lost injectivity at t = {time}: min J = {j_min}")]
    Inverted { time: f64, j_min: f64 },
    #[error("non-finite values in the state at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("profile exponent {profile} does not match solver exponent {solver}")]
    GammaMismatch { profile: f64, solver: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kappa: f64,
    pub gamma: f64,
    /// Fixed step; `None` selects `stable_dt` every step.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub cfl: f64,
    /// Steps between stored samples.
    pub snapshot_stride: usize,
    /// Attach energy reports to the trajectory.
    pub reports: bool,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            gamma: 2.0,
            dt: None,
            t_end: 0.1,
            cfl: 0.5,
            snapshot_stride: 10,
            reports: true,
            max_steps: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 1, got {}", self.gamma));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be > 0, got {dt}"));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be positive".into());
        }
        Ok(())
    }
}

fn enthalpy_coeff(gamma: f64) -> f64 {
    gamma / (gamma - 1.0)
}

fn valid_snapshot(
    domain: &DiscreteDomain,
    eta: &VectorField,
    time: f64,
) -> Result<GeometrySnapshot, SolverError> {
    let snap = GeometrySnapshot::from_map(domain, eta)?;
    if !snap.valid {
        return Err(SolverError::Inverted {
            time,
            j_min: snap.j_min,
        });
    }
    Ok(snap)
}

/// `G = rho0^(gamma-1) J^(1-gamma)`, the pulled-back `rho^(gamma-1)`.
pub fn enthalpy(snap: &GeometrySnapshot, profile: &DensityProfile) -> ScalarField {
    let e = 1.0 - profile.gamma;
    profile
        .g0
        .iter()
        .zip(&snap.j)
        .map(|(g, j)| g * j.powf(e))
        .collect()
}

fn pullback_gradient(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    f: &[f64],
    scale: f64,
) -> Result<VectorField, GridError> {
    let dim = domain.dim();
    let mut out = VectorField::zeros(domain);
    for k in 0..dim {
        let d = domain.diff(f, k, 1)?;
        for i in 0..dim {
            for (idx, o) in out.comps[i].iter_mut().enumerate() {
                *o += scale * snap.inv[idx][k][i] * d[idx];
            }
        }
    }
    Ok(out)
}

fn specific_force_with(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    profile: &DensityProfile,
) -> Result<VectorField, GridError> {
    let g = enthalpy(snap, profile);
    pullback_gradient(domain, snap, &g, enthalpy_coeff(profile.gamma))
}

/// Specific pressure force `q = w / rho0` for the flow map `eta`.
pub fn specific_force(
    domain: &DiscreteDomain,
    eta: &VectorField,
    profile: &DensityProfile,
) -> Result<VectorField, SolverError> {
    let snap = valid_snapshot(domain, eta, f64::NAN)?;
    Ok(specific_force_with(domain, &snap, profile)?)
}

/// Pressure force `w_i = a[k][i] D_k(rho0^gamma J^-gamma)`, evaluated as `rho0 q`.
pub fn force_field(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
) -> Result<VectorField, SolverError> {
    let mut q = specific_force(domain, &state.eta, profile)?;
    for c in q.comps.iter_mut() {
        c.iter_mut().zip(&profile.rho0).for_each(|(x, r)| *x *= r);
    }
    Ok(q)
}

/// Time derivative of `q` along `eta_t = v`, from `A_t = -A Dv A` and
/// `G_t = (1 - gamma) G J_t / J`.
pub fn force_rate(
    domain: &DiscreteDomain,
    eta: &VectorField,
    v: &VectorField,
    profile: &DensityProfile,
) -> Result<VectorField, SolverError> {
    let snap = valid_snapshot(domain, eta, f64::NAN)?;
    let dim = domain.dim();
    let n = domain.len();
    let c = enthalpy_coeff(profile.gamma);
    let dv = v.gradient(domain)?;
    let jt = snap.jacobian_rate(&dv);
    let g = enthalpy(&snap, profile);
    let gdot: ScalarField = (0..n)
        .map(|i| (1.0 - profile.gamma) * g[i] * jt[i] / snap.j[i])
        .collect();
    let mut out = pullback_gradient(domain, &snap, &gdot, c)?;
    let dg: Vec<ScalarField> = (0..dim)
        .map(|k| domain.diff(&g, k, 1))
        .collect::<Result<_, _>>()?;
    for idx in 0..n {
        let a = &snap.inv[idx];
        let gr = &dv[idx];
        for i in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                // A_t[k][i] = -A[k][r] Dv[r][s] A[s][i]
                let mut adot = 0.0;
                for r in 0..dim {
                    for ss in 0..dim {
                        adot -= a[k][r] * gr[r][ss] * a[ss][i];
                    }
                }
                s += adot * dg[k][idx];
            }
            out.comps[i][idx] += c * s;
        }
    }
    Ok(out)
}

/// `v_t = -q - kappa q_t` for the given position and velocity.
pub fn acceleration(
    domain: &DiscreteDomain,
    eta: &VectorField,
    v: &VectorField,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<VectorField, SolverError> {
    let q = specific_force(domain, eta, profile)?;
    let mut acc = q.scaled(-1.0);
    if kappa != 0.0 {
        acc.axpy(-kappa, &force_rate(domain, eta, v, profile)?);
    }
    Ok(acc)
}

/// Builds the `t = 0` state with `q_prev = q(e)`.
pub fn initial_state(
    domain: &DiscreteDomain,
    u0: VectorField,
    profile: &DensityProfile,
) -> Result<FlowState, SolverError> {
    let mut state = FlowState::initial(domain, u0);
    state.q_prev = specific_force(domain, &state.eta, profile)?;
    Ok(state)
}

/// Largest squared sound speed `gamma G` over the grid.
pub fn max_sound_speed_sq(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
) -> Result<f64, SolverError> {
    let snap = valid_snapshot(domain, &state.eta, state.time)?;
    Ok(enthalpy(&snap, profile)
        .iter()
        .fold(0.0f64, |m, g| m.max(profile.gamma * g)))
}

/// `cfl * min(h / c_max, h^2 / (2 kappa c_max^2))` with both denominators
/// floored by [`SOUND_SPEED_FLOOR`] and [`DIFFUSIVITY_FLOOR`].
pub fn stable_dt(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
    config: &SolverConfig,
) -> Result<f64, SolverError> {
    let c2 = max_sound_speed_sq(domain, state, profile)?;
    Ok(dt_bound(domain.min_spacing(), c2, config.kappa, config.cfl))
}

pub fn dt_bound(h: f64, c2_max: f64, kappa: f64, cfl: f64) -> f64 {
    let acoustic = h / c2_max.sqrt().max(SOUND_SPEED_FLOOR);
    let parabolic = h * h / (2.0 * kappa * c2_max).max(DIFFUSIVITY_FLOOR);
    cfl * acoustic.min(parabolic)
}

/// Advances one step of size `dt`. `state.q_prev` must hold `q(state.eta)`.
pub fn step(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
    kappa: f64,
    dt: f64,
) -> Result<FlowState, SolverError> {
    let t1 = state.time + dt;
    let q0 = &state.q_prev;
    // m^{n+1/2} = v^n + kappa q^n - dt/2 q^n
    let m_half = state.v.plus(kappa - 0.5 * dt, q0);

    let eta_new = if kappa == 0.0 {
        state.eta.plus(dt, &m_half)
    } else {
        let eta_mid = state.eta.plus(0.5 * dt, &m_half.plus(-kappa, q0));
        let q_mid = specific_force(domain, &eta_mid, profile)
            .map_err(|e| with_time(e, state.time + 0.5 * dt))?;
        state.eta.plus(dt, &m_half.plus(-kappa, &q_mid))
    };
    let q1 = specific_force(domain, &eta_new, profile).map_err(|e| with_time(e, t1))?;
    // v^{n+1} = m^{n+1/2} - dt/2 q^{n+1} - kappa q^{n+1}
    let v_new = m_half.plus(-(0.5 * dt + kappa), &q1);

    let next = FlowState {
        eta: eta_new,
        v: v_new,
        q_prev: q1,
        time: t1,
    };
    if !next.is_finite() {
        return Err(SolverError::NonFinite { time: t1 });
    }
    Ok(next)
}

fn with_time(e: SolverError, time: f64) -> SolverError {
    match e {
        SolverError::Inverted { j_min, .. } => SolverError::Inverted { time, j_min },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub domain: DiscreteDomain,
    pub samples: Vec<FlowState>,
    pub reports: Vec<EnergyReport>,
    pub kappa: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &FlowState {
        self.samples.last().expect("trajectory holds the initial sample")
    }

    /// Sample index whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if (s.time - t).abs() < (self.samples[best].time - t).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Error)]
#[error("run aborted at t = {time} after {steps} steps: {error}")]
pub struct RunAbort {
    pub time: f64,
    pub steps: usize,
    pub error: SolverError,
    /// Samples stored before the failure, ending with the last good state.
    pub partial: Box<Trajectory>,
}

/// Integrates from `(e, u0)` to `config.t_end`.
pub fn run(
    domain: &DiscreteDomain,
    u0: VectorField,
    profile: &DensityProfile,
    config: &SolverConfig,
) -> Result<Trajectory, RunAbort> {
    let abort = |error: SolverError, traj: Trajectory| RunAbort {
        time: traj.last().time,
        steps: traj.steps,
        error,
        partial: Box::new(traj),
    };
    let mut traj = Trajectory {
        domain: domain.clone(),
        samples: Vec::new(),
        reports: Vec::new(),
        kappa: config.kappa,
        steps: 0,
    };
    let initial = FlowState::initial(domain, u0.clone());
    let checks = config.validate().and_then(|_| {
        if (profile.gamma - config.gamma).abs() > 1e-12 {
            Err(SolverError::GammaMismatch {
                profile: profile.gamma,
                solver: config.gamma,
            })
        } else if u0.dim() != domain.dim() || u0.len() != domain.len() || !u0.is_finite() {
            Err(SolverError::Config(
                "initial velocity must be finite and match the domain".into(),
            ))
        } else {
            Ok(())
        }
    });
    if let Err(e) = checks {
        traj.samples.push(initial);
        return Err(abort(e, traj));
    }
    let mut state = match initial_state(domain, u0, profile) {
        Ok(s) => s,
        Err(e) => {
            traj.samples.push(initial);
            return Err(abort(e, traj));
        }
    };
    traj.samples.push(state.clone());

    let t_end = config.t_end;
    let fixed = config.dt.map(|dt| {
        let n = ((t_end / dt) - 1e-9).ceil().max(1.0);
        t_end / n
    });
    let tol = 1e-12 * t_end.max(1.0);
    while state.time < t_end - tol {
        if traj.steps >= config.max_steps {
            let e = SolverError::Config(format!("exceeded max_steps = {}", config.max_steps));
            keep_last(&mut traj, &state);
            return Err(abort(e, finish(traj, profile, config)));
        }
        let dt = match fixed {
            Some(dt) => dt,
            None => match stable_dt(domain, &state, profile, config) {
                Ok(dt) => dt.min(t_end - state.time),
                Err(e) => {
                    keep_last(&mut traj, &state);
                    return Err(abort(e, finish(traj, profile, config)));
                }
            },
        };
        match step(domain, &state, profile, config.kappa, dt) {
            Ok(mut next) => {
                if fixed.is_some() && (next.time - t_end).abs() < tol {
                    next.time = t_end;
                }
                state = next;
                traj.steps += 1;
                let at_end = state.time >= t_end - tol;
                if traj.steps % config.snapshot_stride == 0 || at_end {
                    traj.samples.push(state.clone());
                }
            }
            Err(e) => {
                keep_last(&mut traj, &state);
                return Err(abort(e, finish(traj, profile, config)));
            }
        }
    }
    Ok(finish(traj, profile, config))
}

fn keep_last(traj: &mut Trajectory, state: &FlowState) {
    if traj.last().time < state.time {
        traj.samples.push(state.clone());
    }
}

fn finish(mut traj: Trajectory, profile: &DensityProfile, config: &SolverConfig) -> Trajectory {
    if config.reports {
        traj.reports = attach_reports(&traj, profile, config.kappa).unwrap_or_default();
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vacuum::{density_profile, ProfileKind};

    fn setup(n: usize) -> (DiscreteDomain, DensityProfile) {
        let d = DiscreteDomain::new(1, 0, n).unwrap();
        let p = density_profile(
            ProfileKind::Parabolic {
                c: 1.0,
                modulation: 0.0,
            },
            2.0,
            &d,
        )
        .unwrap();
        (d, p)
    }

    #[test]
    fn force_at_identity() {
        let (d, p) = setup(33);
        let s = FlowState::initial(&d, VectorField::zeros(&d));
        let w = force_field(&d, &s, &p).unwrap();
        for i in 0..d.len() {
            let z = d.height(i);
            assert!((w.comps[0][i] - 2.0 * z * (1.0 - z) * (1.0 - 2.0 * z)).abs() < 1e-12);
        }
    }

    #[test]
    fn force_for_affine_map() {
        let (d, p) = setup(33);
        let r = 1.3;
        let mut s = FlowState::initial(&d, VectorField::zeros(&d));
        s.eta = VectorField::from_fn(&d, |x| [0.5 + r * (x[0] - 0.5), 0.0, 0.0]);
        let w = force_field(&d, &s, &p).unwrap();
        for i in 0..d.len() {
            let z = d.height(i);
            let exact = -4.0 * z * (1.0 - z) * (z - 0.5) / (r * r);
            assert!((w.comps[0][i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_dt_examples() {
        let dt = dt_bound(0.01, 2.0 * 0.25, 0.0, 0.5);
        assert!((dt - 0.5 * 0.01 / 0.5f64.sqrt()).abs() < 1e-15);
        let dt = dt_bound(0.01, 0.5, 1.0, 1.0);
        assert!((dt - 1e-4 / (2.0 * 0.5)).abs() < 1e-15);
        let (d, p) = setup(101);
        let s = initial_state(&d, VectorField::zeros(&d), &p).unwrap();
        let cfg = SolverConfig::default();
        let dt = stable_dt(&d, &s, &p, &cfg).unwrap();
        assert!((dt - 0.5 * 0.01 / 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_length_run() {
        let (d, p) = setup(17);
        let cfg = SolverConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let traj = run(&d, VectorField::zeros(&d), &p, &cfg).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.samples[0].time, 0.0);
    }

    #[test]
    fn first_step_from_rest() {
        let (d, p) = setup(65);
        let s = initial_state(&d, VectorField::zeros(&d), &p).unwrap();
        let dt = 1e-4;
        let next = step(&d, &s, &p, 0.0, dt).unwrap();
        for i in 0..d.len() {
            let z = d.height(i);
            let expect = -dt * 2.0 * (1.0 - 2.0 * z);
            assert!((next.v.comps[0][i] - expect).abs() < 1e-9);
        }
        assert!(next.v.comps[0][64] > 0.0);
        assert!(next.v.comps[0][0] < 0.0);
    }

    #[test]
    fn initial_acceleration_matches_closed_form() {
        use std::f64::consts::PI;
        let d = DiscreteDomain::new(2, 64, 65).unwrap();
        let p = density_profile(
            ProfileKind::Parabolic {
                c: 1.0,
                modulation: 0.0,
            },
            2.0,
            &d,
        )
        .unwrap();
        let kappa = 0.1;
        let u0 = VectorField::from_fn(&d, |x| {
            [0.2 * (2.0 * PI * x[0]).sin() * x[1], 0.3 * x[1] * x[1], 0.0]
        });
        let eta = VectorField::identity(&d);
        let acc = acceleration(&d, &eta, &u0, &p, kappa).unwrap();
        // (2 kappa rho0 div u0 - 2 rho0)_i + 2 kappa u0^k_i rho0_k
        let mut err: f64 = 0.0;
        for idx in 0..d.len() {
            let [x, z, _] = d.position(idx);
            let rho = z * (1.0 - z);
            let rz = 1.0 - 2.0 * z;
            let s = (2.0 * PI * x).sin();
            let c = (2.0 * PI * x).cos();
            let div = 0.4 * PI * c * z + 0.6 * z;
            let div_x = -0.8 * PI * PI * s * z;
            let div_z = 0.4 * PI * c + 0.6;
            let ex = 2.0 * kappa * rho * div_x;
            let ez = 2.0 * kappa * (rz * div + rho * div_z) - 2.0 * rz + 2.0 * kappa * 0.6 * z * rz;
            err = err.max((acc.comps[0][idx] - ex).abs()).max((acc.comps[1][idx] - ez).abs());
        }
        assert!(err < 5e-3, "{err}");
    }
}
