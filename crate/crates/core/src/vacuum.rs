//! Initial density profiles with a physical vacuum boundary, the gamma-law
//! equation of state, and smoothing of initial data.
//!
//! A profile stores `g0 = rho0^(gamma-1)` alongside `rho0`. Near the vacuum
//! boundary `g0` vanishes linearly, which is the quantity the solver
//! differentiates, so it is kept exact for the built-in families.

use crate::geometry::VectorField;
use crate::grid::{DiscreteDomain, Face, GridError, ScalarField, MAX_DIM};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Vanishing-rate ratio at which a profile is judged to degenerate faster
/// than linearly. A power law `d^b` gives ratio `2^(b-1)`.
pub const RATE_RATIO_LIMIT: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VacuumError {
    #[error("adiabatic exponent must exceed 1 (got {0})")]
    BadGamma(f64),
    #[error("profile parameter `{name}` is invalid: {reason}")]
    BadParameter { name: &'static str, reason: String },
    #[error("density is negative or not finite at node {node} ({value})")]
    BadDensity { node: usize, value: f64 },
    #[error("density must vanish on the {face:?} face (node {node} has {value})")]
    NotVacuum { face: Face, node: usize, value: f64 },
    #[error("density must be positive in the interior (node {node} has {value})")]
    InteriorVacuum { node: usize, value: f64 },
    #[error("rho0^(gamma-1) has non-positive inward slope {slope} on the {face:?} face at node {node}")]
    NoAcceleration { face: Face, node: usize, slope: f64 },
    #[error(
        "rho0^(gamma-1) vanishes faster than the boundary distance on the {face:?} face at node {node} (estimated exponent {exponent:.3})"
    )]
    FastDegeneracy { face: Face, node: usize, exponent: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosParams {
    pub gamma: f64,
    /// Adiabatic constant in `p = c_gamma rho^gamma`.
    pub c_gamma: f64,
}

impl EosParams {
    pub fn new(gamma: f64) -> Result<Self, VacuumError> {
        Self::with_constant(gamma, 1.0)
    }

    pub fn with_constant(gamma: f64, c_gamma: f64) -> Result<Self, VacuumError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(VacuumError::BadGamma(gamma));
        }
        if !(c_gamma > 0.0 && c_gamma.is_finite()) {
            return Err(VacuumError::BadParameter {
                name: "c_gamma",
                reason: format!("must be positive, got {c_gamma}"),
            });
        }
        Ok(Self { gamma, c_gamma })
    }
}

fn check_rho(rho: f64) -> Result<(), VacuumError> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(VacuumError::BadDensity {
            node: 0,
            value: rho,
        });
    }
    Ok(())
}

pub fn pressure(rho: f64, eos: &EosParams) -> Result<f64, VacuumError> {
    check_rho(rho)?;
    Ok(eos.c_gamma * rho.powf(eos.gamma))
}

pub fn sound_speed_sq(rho: f64, eos: &EosParams) -> Result<f64, VacuumError> {
    check_rho(rho)?;
    Ok(eos.gamma * eos.c_gamma * rho.powf(eos.gamma - 1.0))
}

fn map_field(
    rho: &[f64],
    f: impl Fn(f64) -> Result<f64, VacuumError>,
) -> Result<ScalarField, VacuumError> {
    rho.iter()
        .enumerate()
        .map(|(node, &r)| {
            f(r).map_err(|e| match e {
                VacuumError::BadDensity { value, .. } => VacuumError::BadDensity { node, value },
                other => other,
            })
        })
        .collect()
}

pub fn pressure_field(rho: &[f64], eos: &EosParams) -> Result<ScalarField, VacuumError> {
    map_field(rho, |r| pressure(r, eos))
}

pub fn sound_speed_sq_field(rho: &[f64], eos: &EosParams) -> Result<ScalarField, VacuumError> {
    map_field(rho, |r| sound_speed_sq(r, eos))
}

/// Smooth step from 0 on `(-inf, 0]` to 1 on `[1, inf)`.
fn smooth_step(t: f64) -> (f64, f64) {
    fn psi(t: f64) -> (f64, f64) {
        if t <= 0.0 {
            (0.0, 0.0)
        } else {
            let e = (-1.0 / t).exp();
            (e, e / (t * t))
        }
    }
    let (a, da) = psi(t);
    let (b, db) = psi(1.0 - t);
    let s = a + b;
    (a / s, (da * b + a * db) / (s * s))
}

/// Smoothed boundary distance on `[0, 1]`: equal to `z` on `[0, 1/4]`, to
/// `1 - z` on `[3/4, 1]`, and infinitely smooth in between. Returns the value
/// and the derivative.
pub fn smoothed_distance(z: f64) -> (f64, f64) {
    let (b, db) = smooth_step(2.0 * z - 0.5);
    let val = z * (1.0 - b) + (1.0 - z) * b;
    let der = (1.0 - b) - b + (1.0 - 2.0 * z) * 2.0 * db;
    (val, der)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `rho0^(gamma-1) = c z (1 - z) (1 + modulation cos(2 pi x1))`.
    Parabolic {
        c: f64,
        #[serde(default)]
        modulation: f64,
    },
    /// `rho0^(gamma-1) = c d~(z)` with the smoothed distance `d~`.
    LinearRamp { c: f64 },
    /// User-supplied nodal density.
    Custom { rho0: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub kind: ProfileKind,
    pub gamma: f64,
    pub rho0: ScalarField,
    /// `rho0^(gamma-1)`.
    pub g0: ScalarField,
    pub grad_rho0: VectorField,
    pub grad_g0: VectorField,
    /// Exact distance `min(z, 1 - z)` to the vacuum boundary.
    pub d: ScalarField,
    pub vacuum: VacuumEstimate,
}

/// Result of the physical vacuum check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumEstimate {
    /// Lower bound `C` in `rho0^(gamma-1) >= C d` near the boundary.
    pub constant: f64,
    /// Largest estimated vanishing exponent over both faces.
    pub max_exponent: f64,
    /// Smallest one-sided inward slope of `rho0^(gamma-1)`.
    pub min_slope: f64,
}

pub fn density_profile(
    kind: ProfileKind,
    gamma: f64,
    domain: &DiscreteDomain,
) -> Result<DensityProfile, VacuumError> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(VacuumError::BadGamma(gamma));
    }
    let dim = domain.dim();
    let vert = domain.vertical_axis();
    let inv = 1.0 / (gamma - 1.0);

    let (g0, grad_g0) = match &kind {
        ProfileKind::Parabolic { c, modulation } => {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(VacuumError::BadParameter {
                    name: "c",
                    reason: format!("must be positive, got {c}"),
                });
            }
            if !(modulation.abs() < 1.0) {
                return Err(VacuumError::BadParameter {
                    name: "modulation",
                    reason: format!("must satisfy |m| < 1, got {modulation}"),
                });
            }
            let (c, m) = (*c, if dim > 1 { *modulation } else { 0.0 });
            let g = domain.sample(|x| {
                let z = x[vert];
                c * z * (1.0 - z) * (1.0 + m * (2.0 * PI * x[0]).cos())
            });
            let grad = VectorField::from_fn(domain, |x| {
                let z = x[vert];
                let hmod = 1.0 + m * (2.0 * PI * x[0]).cos();
                let mut gr = [0.0; MAX_DIM];
                if dim > 1 {
                    gr[0] = -c * z * (1.0 - z) * m * 2.0 * PI * (2.0 * PI * x[0]).sin();
                }
                gr[vert] = c * (1.0 - 2.0 * z) * hmod;
                gr
            });
            (g, grad)
        }
        ProfileKind::LinearRamp { c } => {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(VacuumError::BadParameter {
                    name: "c",
                    reason: format!("must be positive, got {c}"),
                });
            }
            let c = *c;
            let g = domain.sample(|x| c * smoothed_distance(x[vert]).0);
            let grad = VectorField::from_fn(domain, |x| {
                let mut gr = [0.0; MAX_DIM];
                gr[vert] = c * smoothed_distance(x[vert]).1;
                gr
            });
            (g, grad)
        }
        ProfileKind::Custom { rho0 } => {
            domain.check_len(rho0)?;
            for (node, &r) in rho0.iter().enumerate() {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(VacuumError::BadDensity { node, value: r });
                }
            }
            let g: ScalarField = rho0.iter().map(|r| r.powf(gamma - 1.0)).collect();
            let mut grad = VectorField::zeros(domain);
            for a in 0..dim {
                grad.comps[a] = domain.diff(&g, a, 1)?;
            }
            (g, grad)
        }
    };

    let rho0: ScalarField = match &kind {
        ProfileKind::Custom { rho0 } => rho0.clone(),
        _ => g0.iter().map(|g| g.max(0.0).powf(inv)).collect(),
    };
    // D rho0 = rho0^(2-gamma) D g0 / (gamma - 1), continuous up to the boundary for gamma <= 2
    let grad_rho0 = match &kind {
        ProfileKind::Custom { .. } => {
            let mut gr = VectorField::zeros(domain);
            for a in 0..dim {
                gr.comps[a] = domain.diff(&rho0, a, 1)?;
            }
            gr
        }
        _ => {
            let mut gr = VectorField::zeros(domain);
            for a in 0..dim {
                gr.comps[a] = (0..domain.len())
                    .map(|i| {
                        let g = g0[i].max(0.0);
                        if g == 0.0 {
                            if (gamma - 2.0).abs() < 1e-15 {
                                grad_g0.comps[a][i]
                            } else if gamma < 2.0 {
                                0.0
                            } else {
                                // slope is unbounded at vacuum for gamma > 2; report the one-sided stencil
                                f64::NAN
                            }
                        } else {
                            g.powf(inv - 1.0) * inv * grad_g0.comps[a][i]
                        }
                    })
                    .collect();
            }
            if gr.comps.iter().flatten().any(|v| v.is_nan()) {
                for a in 0..dim {
                    let d = domain.diff(&rho0, a, 1)?;
                    for (x, y) in gr.comps[a].iter_mut().zip(d) {
                        if x.is_nan() {
                            *x = y;
                        }
                    }
                }
            }
            gr
        }
    };

    let vacuum = check_physical_vacuum(domain, &rho0, gamma)?;
    let d = domain.sample(|x| x[vert].min(1.0 - x[vert]));
    Ok(DensityProfile {
        kind,
        gamma,
        rho0,
        g0,
        grad_rho0,
        grad_g0,
        d,
        vacuum,
    })
}

/// Checks vanishing on the boundary, interior positivity, a positive inward
/// slope of `rho0^(gamma-1)`, and that it vanishes no faster than linearly.
///
/// Each boundary column is inspected through its two nearest interior layers
/// `g1, g2`: the slope is the one-sided second-order stencil, and the
/// vanishing rate compares the difference quotients `g2/(2h)` and `g1/h`.
pub fn check_physical_vacuum(
    domain: &DiscreteDomain,
    rho0: &[f64],
    gamma: f64,
) -> Result<VacuumEstimate, VacuumError> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(VacuumError::BadGamma(gamma));
    }
    domain.check_len(rho0)?;
    for (node, &r) in rho0.iter().enumerate() {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(VacuumError::BadDensity { node, value: r });
        }
        match domain.face_of(node) {
            Some(face) if r != 0.0 => {
                return Err(VacuumError::NotVacuum {
                    face,
                    node,
                    value: r,
                })
            }
            None if r <= 0.0 => return Err(VacuumError::InteriorVacuum { node, value: r }),
            _ => {}
        }
    }

    let vert = domain.vertical_axis();
    let h = domain.spacing(vert);
    let mut est = VacuumEstimate {
        constant: f64::INFINITY,
        max_exponent: f64::NEG_INFINITY,
        min_slope: f64::INFINITY,
    };
    for (node, face) in domain.boundary_nodes() {
        let step = match face {
            Face::Bottom => 1,
            Face::Top => -1,
        };
        let at = |k: isize| {
            let i = domain
                .neighbor(node, vert, k * step)
                .expect("vertical axis has at least four nodes");
            rho0[i].powf(gamma - 1.0)
        };
        let (g0, g1, g2) = (at(0), at(1), at(2));
        let slope = (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h);
        if !(slope > 0.0) {
            return Err(VacuumError::NoAcceleration { face, node, slope });
        }
        let ratio = (g2 / (2.0 * h)) / (g1 / h);
        let exponent = 1.0 + ratio.log2();
        if !(ratio < RATE_RATIO_LIMIT) {
            return Err(VacuumError::FastDegeneracy {
                face,
                node,
                exponent,
            });
        }
        est.constant = est.constant.min((g1 / h).min(g2 / (2.0 * h)));
        est.max_exponent = est.max_exponent.max(exponent);
        est.min_slope = est.min_slope.min(slope);
    }
    Ok(est)
}

/// Gaussian smoothing of initial data with standard deviation `radius`.
///
/// Horizontal axes are periodic. Vertically the velocity is reflected evenly
/// and `rho0^(gamma-1)` oddly about each face, so the smoothed density still
/// vanishes linearly in that variable. The result is clamped to zero on the
/// boundary and revalidated.
pub fn mollify_initial_data(
    domain: &DiscreteDomain,
    u0: &VectorField,
    rho0: &[f64],
    gamma: f64,
    radius: f64,
) -> Result<(VectorField, ScalarField), VacuumError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(VacuumError::BadParameter {
            name: "radius",
            reason: format!("must be non-negative, got {radius}"),
        });
    }
    domain.check_len(rho0)?;
    if radius == 0.0 {
        return Ok((u0.clone(), rho0.to_vec()));
    }
    let mut u = u0.clone();
    for comp in u.comps.iter_mut() {
        *comp = smooth_field(domain, comp, radius, Reflect::Even);
    }
    let g: ScalarField = rho0.iter().map(|r| r.powf(gamma - 1.0)).collect();
    let g = smooth_field(domain, &g, radius, Reflect::Odd);
    let inv = 1.0 / (gamma - 1.0);
    let rho: ScalarField = g
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if domain.is_boundary(i) {
                0.0
            } else {
                g.max(0.0).powf(inv)
            }
        })
        .collect();
    check_physical_vacuum(domain, &rho, gamma)?;
    Ok((u, rho))
}

#[derive(Clone, Copy)]
enum Reflect {
    Even,
    Odd,
}

fn smooth_field(domain: &DiscreteDomain, f: &[f64], sigma: f64, reflect: Reflect) -> ScalarField {
    let mut cur = f.to_vec();
    for axis in 0..domain.dim() {
        let h = domain.spacing(axis);
        let half = ((3.0 * sigma / h).ceil() as isize).max(1);
        let mut w: Vec<f64> = (-half..=half)
            .map(|k| (-0.5 * (k as f64 * h / sigma).powi(2)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);

        let n = domain.shape()[axis] as isize;
        let stride = domain.stride(axis) as isize;
        let periodic = domain.is_periodic(axis);
        let src = cur.clone();
        for (idx, out) in cur.iter_mut().enumerate() {
            let i = domain.axis_index(idx, axis) as isize;
            let base = idx as isize - i * stride;
            let mut acc = 0.0;
            for (k, wk) in (-half..=half).zip(&w) {
                let mut j = i + k;
                let mut sign = 1.0;
                if periodic {
                    j = j.rem_euclid(n);
                } else {
                    // reflect about the end nodes until inside
                    loop {
                        if j < 0 {
                            j = -j;
                        } else if j > n - 1 {
                            j = 2 * (n - 1) - j;
                        } else {
                            break;
                        }
                        if let Reflect::Odd = reflect {
                            sign = -sign;
                        }
                    }
                }
                acc += wk * sign * src[(base + j * stride) as usize];
            }
            *out = acc;
        }
    }
    cur
}
