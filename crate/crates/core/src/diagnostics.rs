//! Energy functionals and structural residuals evaluated along trajectories.
//!
//! The higher-order energy is truncated to the time-derivative levels
//! `a = 0, 1`; `v_t` and `v_tt` come from three-point differences of stored
//! samples. Spatial norms of order four are built from composed second-order
//! stencils, so they carry the accuracy of those stencils only.

use crate::geometry::{
    curl_of, lagrangian_curl, matmul, piola_residual, FlowState, GeometrySnapshot, TensorField,
    VectorField, ZERO3,
};
use crate::grid::{DiscreteDomain, Face, GridError, ScalarField, MAX_DIM};
use crate::kappa::{enthalpy, specific_force, SolverError, Trajectory};
use crate::vacuum::DensityProfile;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("energy window needs at least 3 samples (got {0})")]
    WindowTooShort(usize),
    #[error("window sample times must be strictly increasing")]
    UnorderedWindow,
    #[error("flow map is not injective at t = {0}")]
    InvalidGeometry(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Names of the terms of the truncated energy, in report order.
pub const E_COMPONENTS: [&str; 8] = [
    "eta_4",
    "vt_3",
    "rho0_Deta_4",
    "rho0_Dvt_3",
    "sqrt_rho0_hbar4_v",
    "sqrt_rho0_hbar3_vtt",
    "curl_v_3",
    "rho0_hbar4_curl_v",
];

/// Extra terms of the general-gamma energy.
pub const GAMMA_COMPONENTS: [&str; 4] = [
    "rho0_hbar4_Deta",
    "rho0_hbar3_Dvt",
    "rho0_Jm2_4",
    "rho0_Jm2tt_3",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub physical_energy: f64,
    /// Squared norms named by [`E_COMPONENTS`].
    pub components: Vec<f64>,
    /// Squared norms named by [`GAMMA_COMPONENTS`].
    pub gamma_components: Vec<f64>,
    pub e_total: f64,
    /// `1 + e_total + int_0^t dissipation`, filled in along a trajectory.
    pub e_tilde: f64,
    pub e_gamma_total: f64,
    /// Integrand of the kappa-weighted time integral in the tilde energy.
    pub dissipation_rate: f64,
    pub curl_residual: f64,
    pub piola_residual_max: f64,
    pub j_min: f64,
    pub j_max: f64,
}

impl EnergyReport {
    pub fn component(&self, name: &str) -> Option<f64> {
        E_COMPONENTS
            .iter()
            .position(|n| *n == name)
            .map(|i| self.components[i])
            .or_else(|| {
                GAMMA_COMPONENTS
                    .iter()
                    .position(|n| *n == name)
                    .map(|i| self.gamma_components[i])
            })
    }

    pub fn csv_header() -> String {
        let mut cols = vec!["t".to_string(), "physical_energy".to_string()];
        cols.extend(E_COMPONENTS.iter().map(|s| s.to_string()));
        cols.push("e_total".into());
        cols.push("e_tilde".into());
        cols.extend(GAMMA_COMPONENTS.iter().map(|s| s.to_string()));
        cols.extend(
            [
                "e_gamma_total",
                "curl_residual",
                "piola_residual_max",
                "j_min",
                "j_max",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn csv_values(&self) -> Vec<f64> {
        let mut v = vec![self.t, self.physical_energy];
        v.extend(&self.components);
        v.push(self.e_total);
        v.push(self.e_tilde);
        v.extend(&self.gamma_components);
        v.extend([
            self.e_gamma_total,
            self.curl_residual,
            self.piola_residual_max,
            self.j_min,
            self.j_max,
        ]);
        v
    }
}

fn snapshot_checked(
    domain: &DiscreteDomain,
    state: &FlowState,
) -> Result<GeometrySnapshot, DiagnosticsError> {
    let snap = GeometrySnapshot::from_map(domain, &state.eta)?;
    if !snap.valid {
        return Err(DiagnosticsError::InvalidGeometry(state.time));
    }
    Ok(snap)
}

/// `int [1/2 rho0 |v|^2 + rho0^gamma J^(1-gamma) / (gamma - 1)] dx`.
pub fn physical_energy(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
) -> Result<f64, DiagnosticsError> {
    let snap = snapshot_checked(domain, state)?;
    let g = enthalpy(&snap, profile);
    let gm1 = profile.gamma - 1.0;
    let dens: ScalarField = (0..domain.len())
        .map(|i| {
            let v2: f64 = state.v.comps.iter().map(|c| c[i] * c[i]).sum();
            let r = profile.rho0[i];
            0.5 * r * v2 + r * g[i] / gm1
        })
        .collect();
    Ok(domain.integrate(&dens))
}

/// Lagrange weights for the first and second derivative at `t` through three nodes.
fn lagrange3(ts: [f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
    let [t0, t1, t2] = ts;
    let den = [(t0 - t1) * (t0 - t2), (t1 - t0) * (t1 - t2), (t2 - t0) * (t2 - t1)];
    let d1 = [
        (2.0 * t - t1 - t2) / den[0],
        (2.0 * t - t0 - t2) / den[1],
        (2.0 * t - t0 - t1) / den[2],
    ];
    let d2 = [2.0 / den[0], 2.0 / den[1], 2.0 / den[2]];
    (d1, d2)
}

fn combine(fields: [&VectorField; 3], w: [f64; 3]) -> VectorField {
    let mut out = fields[0].scaled(w[0]);
    out.axpy(w[1], fields[1]);
    out.axpy(w[2], fields[2]);
    out
}

fn combine_scalar(fields: [&ScalarField; 3], w: [f64; 3]) -> ScalarField {
    (0..fields[0].len())
        .map(|i| w[0] * fields[0][i] + w[1] * fields[1][i] + w[2] * fields[2][i])
        .collect()
}

fn vector_sobolev_sq(
    domain: &DiscreteDomain,
    f: &VectorField,
    order: usize,
) -> Result<f64, GridError> {
    let mut total = 0.0;
    for (r, c) in f.comps.iter().enumerate() {
        total += domain.sobolev_norm_sq(c, order, &f.shift[r])?;
    }
    Ok(total)
}

fn tensor_weighted_sobolev_sq(
    domain: &DiscreteDomain,
    t: &TensorField,
    weight: &[f64],
    order: usize,
) -> Result<f64, GridError> {
    let dim = domain.dim();
    let mut total = 0.0;
    for r in 0..dim {
        for s in 0..dim {
            let f: ScalarField = t.iter().zip(weight).map(|(m, w)| w * m[r][s]).collect();
            total += domain.sobolev_norm_sq(&f, order, &[0.0; MAX_DIM])?;
        }
    }
    Ok(total)
}

/// `sum_{|alpha| = m, horizontal} int weight_sq |D^alpha f|^2` over the listed components.
fn horizontal_sq<'a>(
    domain: &DiscreteDomain,
    comps: impl Iterator<Item = (&'a [f64], [f64; MAX_DIM])>,
    weight_sq: &[f64],
    m: usize,
) -> Result<f64, GridError> {
    let indices = domain.multi_indices(m, true);
    let quad = domain.quad_weights();
    let mut total = 0.0;
    for (c, jumps) in comps {
        for alpha in &indices {
            let d = domain.derivative(c, alpha, &jumps)?;
            total += d
                .iter()
                .zip(weight_sq)
                .zip(quad)
                .map(|((x, w), q)| w * x * x * q)
                .sum::<f64>();
        }
    }
    Ok(total)
}

fn tensor_comps(t: &TensorField, dim: usize) -> Vec<ScalarField> {
    let mut out = Vec::new();
    for r in 0..dim {
        for s in 0..dim {
            out.push(t.iter().map(|m| m[r][s]).collect());
        }
    }
    out
}

fn with_zero_jumps(f: &[ScalarField]) -> impl Iterator<Item = (&[f64], [f64; MAX_DIM])> {
    f.iter().map(|c| (c.as_slice(), [0.0; MAX_DIM]))
}

fn vector_comps(f: &VectorField) -> impl Iterator<Item = (&[f64], [f64; MAX_DIM])> {
    f.comps
        .iter()
        .enumerate()
        .map(move |(r, c)| (c.as_slice(), f.shift[r]))
}

/// Truncated higher-order energy at sample `at` of a window of three
/// consecutive samples. `e_tilde` holds `1 + e_total` without the time
/// integral, which [`attach_reports`] accumulates.
pub fn energy_functional(
    domain: &DiscreteDomain,
    window: &[&FlowState],
    at: usize,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<EnergyReport, DiagnosticsError> {
    if window.len() < 3 {
        return Err(DiagnosticsError::WindowTooShort(window.len()));
    }
    let win = [window[0], window[1], window[2]];
    let ts = [win[0].time, win[1].time, win[2].time];
    if !(ts[0] < ts[1] && ts[1] < ts[2]) {
        return Err(DiagnosticsError::UnorderedWindow);
    }
    let at = at.min(2);
    let state = win[at];
    let (w1, w2) = lagrange3(ts, state.time);
    let vs = [&win[0].v, &win[1].v, &win[2].v];
    let vt = combine(vs, w1);
    let vtt = combine(vs, w2);

    let dim = domain.dim();
    let rho = &profile.rho0;
    let rho_sq: ScalarField = rho.iter().map(|r| r * r).collect();
    let snap = snapshot_checked(domain, state)?;
    let dvt = vt.gradient(domain)?;
    let dvtt = vtt.gradient(domain)?;
    let dv = state.v.gradient(domain)?;
    let curl = lagrangian_curl(domain, &snap, &state.v)?;

    let eta_4 = vector_sobolev_sq(domain, &state.eta, 4)?;
    let vt_3 = vector_sobolev_sq(domain, &vt, 3)?;
    let rho_deta_4 = tensor_weighted_sobolev_sq(domain, &snap.d_eta, rho, 4)?;
    let rho_dvt_3 = tensor_weighted_sobolev_sq(domain, &dvt, rho, 3)?;
    let sv4 = horizontal_sq(domain, vector_comps(&state.v), rho, 4)?;
    let svtt3 = horizontal_sq(domain, vector_comps(&vtt), rho, 3)?;
    let curl_3 = vector_sobolev_sq(domain, &curl, 3)?;
    let rho_curl4 = horizontal_sq(domain, vector_comps(&curl), &rho_sq, 4)?;

    let components = vec![
        eta_4, vt_3, rho_deta_4, rho_dvt_3, sv4, svtt3, curl_3, rho_curl4,
    ];
    let e_total: f64 = components.iter().sum();

    let deta_c = tensor_comps(&snap.d_eta, dim);
    let dvt_c = tensor_comps(&dvt, dim);
    let rho_hbar4_deta = horizontal_sq(domain, with_zero_jumps(&deta_c), &rho_sq, 4)?;
    let rho_hbar3_dvt = horizontal_sq(domain, with_zero_jumps(&dvt_c), &rho_sq, 3)?;
    let jm2 = |s: &FlowState| -> Result<ScalarField, DiagnosticsError> {
        let sn = snapshot_checked(domain, s)?;
        Ok(sn.j.iter().map(|j| j.powi(-2)).collect())
    };
    let jm2s = [jm2(win[0])?, jm2(win[1])?, jm2(win[2])?];
    let jm2tt = combine_scalar([&jm2s[0], &jm2s[1], &jm2s[2]], w2);
    let rho_jm2: ScalarField = jm2s[at].iter().zip(rho).map(|(j, r)| r * j).collect();
    let rho_jm2tt: ScalarField = jm2tt.iter().zip(rho).map(|(j, r)| r * j).collect();
    let rho_jm2_4 = domain.sobolev_norm_sq(&rho_jm2, 4, &[0.0; MAX_DIM])?;
    let rho_jm2tt_3 = domain.sobolev_norm_sq(&rho_jm2tt, 3, &[0.0; MAX_DIM])?;
    let gamma_components = vec![rho_hbar4_deta, rho_hbar3_dvt, rho_jm2_4, rho_jm2tt_3];
    let e_gamma_total = eta_4
        + vt_3
        + rho_hbar4_deta
        + rho_hbar3_dvt
        + sv4
        + svtt3
        + rho_jm2_4
        + rho_jm2tt_3
        + curl_3
        + rho_curl4;

    let dissipation_rate = if kappa > 0.0 {
        let dv_c = tensor_comps(&dv, dim);
        let dvtt_c = tensor_comps(&dvtt, dim);
        kappa
            * (horizontal_sq(domain, with_zero_jumps(&dv_c), &rho_sq, 4)?
                + horizontal_sq(domain, with_zero_jumps(&dvtt_c), &rho_sq, 3)?)
    } else {
        0.0
    };

    let curl_residual = curl_residual_with(domain, &snap, state, &vt, profile, kappa)?;
    let piola = piola_residual(domain, &snap)?.max_abs();

    Ok(EnergyReport {
        t: state.time,
        physical_energy: physical_energy(domain, state, profile)?,
        components,
        gamma_components,
        e_total,
        e_tilde: 1.0 + e_total,
        e_gamma_total,
        dissipation_rate,
        curl_residual,
        piola_residual_max: piola,
        j_min: snap.j_min,
        j_max: snap.j_max,
    })
}

/// One report per sample, using the three-sample window around it. The
/// kappa-weighted time integral of the tilde energy is accumulated by the
/// trapezoid rule. Returns an empty list for fewer than three samples.
pub fn attach_reports(
    traj: &Trajectory,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<Vec<EnergyReport>, DiagnosticsError> {
    let n = traj.samples.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let mut reports: Vec<EnergyReport> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = i.saturating_sub(1).min(n - 3);
            let window: Vec<&FlowState> = traj.samples[start..start + 3].iter().collect();
            energy_functional(&traj.domain, &window, i - start, profile, kappa)
        })
        .collect::<Result<_, _>>()?;
    let mut integral = 0.0;
    for i in 0..n {
        if i > 0 {
            let dt = reports[i].t - reports[i - 1].t;
            integral += 0.5 * dt * (reports[i].dissipation_rate + reports[i - 1].dissipation_rate);
        }
        reports[i].e_tilde = 1.0 + reports[i].e_total + integral;
    }
    Ok(reports)
}

/// `q = A^T grad(c G)` expressed as an Eulerian gradient tensor.
fn force_gradient(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    state: &FlowState,
    profile: &DensityProfile,
) -> Result<TensorField, DiagnosticsError> {
    let q = specific_force(domain, &state.eta, profile)?;
    Ok(snap.eulerian_gradient(domain, &q)?)
}

fn curl_residual_with(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    state: &FlowState,
    vt: &VectorField,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<f64, DiagnosticsError> {
    let dim = domain.dim();
    if dim == 1 {
        return Ok(0.0);
    }
    let mut curl = lagrangian_curl(domain, snap, vt)?;
    if kappa > 0.0 {
        let u = snap.eulerian_gradient(domain, &state.v)?;
        let h = force_gradient(domain, snap, state, profile)?;
        for idx in 0..domain.len() {
            // M[i][j] = sum_r U[r][i] H[r][j]
            let mut ut = ZERO3;
            for r in 0..dim {
                for i in 0..dim {
                    ut[i][r] = u[idx][r][i];
                }
            }
            let m = matmul(&ut, &h[idx], dim);
            let rhs = curl_of(&m, dim);
            for k in 0..dim {
                curl.comps[k][idx] -= kappa * rhs[k];
            }
        }
    }
    Ok(curl.l2_norm(domain))
}

/// L2 norm of `curl_eta v_t` minus, for `kappa > 0`, the vorticity source
/// `kappa curl_eta(U^T q)` with `U = Dv A`. `v_t` is the three-point
/// difference at sample `at` of the window.
pub fn curl_transport_residual(
    domain: &DiscreteDomain,
    window: &[&FlowState],
    at: usize,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<f64, DiagnosticsError> {
    if window.len() < 3 {
        return Err(DiagnosticsError::WindowTooShort(window.len()));
    }
    let ts = [window[0].time, window[1].time, window[2].time];
    if !(ts[0] < ts[1] && ts[1] < ts[2]) {
        return Err(DiagnosticsError::UnorderedWindow);
    }
    let at = at.min(2);
    let state = window[at];
    let (w1, _) = lagrange3(ts, state.time);
    let vt = combine([&window[0].v, &window[1].v, &window[2].v], w1);
    let snap = snapshot_checked(domain, state)?;
    curl_residual_with(domain, &snap, state, &vt, profile, kappa)
}

/// L2 norm of `curl_eta v` at one state.
pub fn vorticity_norm(domain: &DiscreteDomain, state: &FlowState) -> Result<f64, DiagnosticsError> {
    let snap = snapshot_checked(domain, state)?;
    Ok(lagrangian_curl(domain, &snap, &state.v)?.l2_norm(domain))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryTrace {
    pub t: f64,
    pub nodes: Vec<usize>,
    pub bottom: Vec<bool>,
    /// Images `eta(x)` of the boundary nodes.
    pub positions: Vec<[f64; MAX_DIM]>,
    /// `v . n` with the outward unit normal of the deformed boundary.
    pub normal_velocity: Vec<f64>,
}

impl BoundaryTrace {
    pub fn face_values(&self, face: Face) -> impl Iterator<Item = (usize, &[f64; MAX_DIM], f64)> {
        let want_bottom = face == Face::Bottom;
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.bottom[*i] == want_bottom)
            .map(|(i, &n)| (n, &self.positions[i], self.normal_velocity[i]))
    }
}

pub fn boundary_trace(
    domain: &DiscreteDomain,
    state: &FlowState,
) -> Result<BoundaryTrace, DiagnosticsError> {
    let snap = GeometrySnapshot::from_map(domain, &state.eta)?;
    let mut trace = BoundaryTrace {
        t: state.time,
        nodes: Vec::new(),
        bottom: Vec::new(),
        positions: Vec::new(),
        normal_velocity: Vec::new(),
    };
    for b in &snap.boundary {
        let v = state.v.at(b.node);
        trace.nodes.push(b.node);
        trace.bottom.push(b.face == Face::Bottom);
        trace.positions.push(state.eta.at(b.node));
        trace
            .normal_velocity
            .push((0..domain.dim()).map(|i| v[i] * b.normal[i]).sum());
    }
    Ok(trace)
}

/// Smallest `C` with `f(t) <= m0 + C t f(t)^degree` over the history, a
/// reporting aid for the polynomial-type inequality. Samples at `t <= 0` are
/// skipped.
pub fn polynomial_bound_constant(times: &[f64], values: &[f64], m0: f64, degree: u32) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, f)| (f - m0) / (t * f.powi(degree as i32)))
        .fold(0.0, f64::max)
}

/// Last sample time up to which `E(t) <= factor * E(0)` holds without a break.
pub fn bounded_time(times: &[f64], values: &[f64], factor: f64) -> f64 {
    let Some(&e0) = values.first() else {
        return 0.0;
    };
    let mut t_star = 0.0;
    for (t, e) in times.iter().zip(values) {
        if *e <= factor * e0 {
            t_star = *t;
        } else {
            break;
        }
    }
    t_star
}

/// Last sample time up to which `lo <= J <= hi` holds everywhere.
pub fn jacobian_window_time(reports: &[EnergyReport], lo: f64, hi: f64) -> f64 {
    let mut t = 0.0;
    for r in reports {
        if r.j_min >= lo && r.j_max <= hi {
            t = r.t;
        } else {
            break;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kappa::{initial_state, run, SolverConfig};
    use crate::vacuum::{density_profile, ProfileKind};

    fn parabolic(domain: &DiscreteDomain) -> DensityProfile {
        density_profile(
            ProfileKind::Parabolic {
                c: 1.0,
                modulation: 0.0,
            },
            2.0,
            domain,
        )
        .unwrap()
    }

    #[test]
    fn rest_state_energy() {
        let d = DiscreteDomain::new(1, 0, 257).unwrap();
        let p = parabolic(&d);
        let s = FlowState::initial(&d, VectorField::zeros(&d));
        let e = physical_energy(&d, &s, &p).unwrap();
        assert!((e - 1.0 / 30.0).abs() < 1e-5, "{e}");
    }

    #[test]
    fn kinetic_part_scales_quadratically() {
        let d = DiscreteDomain::new(1, 0, 65).unwrap();
        let p = parabolic(&d);
        let v = VectorField::from_fn(&d, |x| [x[0].sin(), 0.0, 0.0]);
        let s0 = FlowState::initial(&d, VectorField::zeros(&d));
        let s1 = FlowState::initial(&d, v.clone());
        let s2 = FlowState::initial(&d, v.scaled(2.0));
        let pot = physical_energy(&d, &s0, &p).unwrap();
        let k1 = physical_energy(&d, &s1, &p).unwrap() - pot;
        let k2 = physical_energy(&d, &s2, &p).unwrap() - pot;
        assert!((k2 - 4.0 * k1).abs() < 1e-14);
    }

    #[test]
    fn frozen_window_is_constant_in_time() {
        let d = DiscreteDomain::new(2, 8, 9).unwrap();
        let p = parabolic(&d);
        let base = FlowState::initial(&d, VectorField::zeros(&d));
        let mut w: Vec<FlowState> = Vec::new();
        for t in [0.0, 0.1, 0.2] {
            let mut s = base.clone();
            s.time = t;
            w.push(s);
        }
        let refs: Vec<&FlowState> = w.iter().collect();
        let reports: Vec<_> = (0..3)
            .map(|i| energy_functional(&d, &refs, i, &p, 0.0).unwrap())
            .collect();
        for r in &reports {
            assert_eq!(r.e_total, reports[0].e_total);
            assert!(r.components.iter().all(|c| *c >= 0.0));
            assert!((r.e_total - r.components.iter().sum::<f64>()).abs() < 1e-12);
            assert!(r.j_min <= r.j_max);
        }
        assert_eq!(reports[0].component("vt_3"), Some(0.0));
        assert!(energy_functional(&d, &refs[..2], 0, &p, 0.0).is_err());
    }

    #[test]
    fn boundary_trace_identity_and_first_step() {
        let d = DiscreteDomain::new(2, 8, 17).unwrap();
        let p = parabolic(&d);
        let s = initial_state(&d, VectorField::zeros(&d), &p).unwrap();
        let tr = boundary_trace(&d, &s).unwrap();
        for (_, pos, _) in tr.face_values(Face::Top) {
            assert_eq!(pos[1], 1.0);
        }
        for (_, pos, _) in tr.face_values(Face::Bottom) {
            assert_eq!(pos[1], 0.0);
        }
        let next = crate::kappa::step(&d, &s, &p, 0.0, 1e-3).unwrap();
        let tr = boundary_trace(&d, &next).unwrap();
        assert!(tr.normal_velocity.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn zero_velocity_has_no_curl() {
        let d = DiscreteDomain::new(2, 8, 9).unwrap();
        let p = parabolic(&d);
        let mut w = Vec::new();
        for t in [0.0, 0.1, 0.2] {
            let mut s = FlowState::initial(&d, VectorField::zeros(&d));
            s.time = t;
            w.push(s);
        }
        let refs: Vec<&FlowState> = w.iter().collect();
        assert_eq!(curl_transport_residual(&d, &refs, 1, &p, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn reports_follow_trajectory() {
        let d = DiscreteDomain::new(1, 0, 33).unwrap();
        let p = parabolic(&d);
        let cfg = SolverConfig {
            t_end: 0.05,
            snapshot_stride: 2,
            ..Default::default()
        };
        let traj = run(&d, VectorField::zeros(&d), &p, &cfg).unwrap();
        assert_eq!(traj.reports.len(), traj.samples.len());
        assert!(traj.reports.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn polynomial_bound_and_times() {
        let t = [0.0, 0.1, 0.2];
        let f = [1.0, 1.1, 1.3];
        let c = polynomial_bound_constant(&t, &f, 1.0, 1);
        assert!((c - (0.3 / (0.2 * 1.3))).abs() < 1e-12);
        assert_eq!(bounded_time(&t, &[1.0, 1.5, 2.5], 2.0), 0.1);
    }
}
