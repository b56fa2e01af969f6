//! Exact affine solutions in one dimension.
//!
//! With `gamma = 2`, `rho0 = c x (1 - x)` and `eta = 1/2 + r(t) (x - 1/2)`,
//! the momentum equation reduces to `rho0 (x - 1/2) [r'' - 4c/r^2 + 8 c kappa
//! r'/r^3] = 0`, so the flow stays affine and `r` solves an ODE, integrated
//! here with classical RK4 and Hermite interpolation between steps.

use crate::geometry::VectorField;
use crate::grid::DiscreteDomain;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle needs c > 0 (got {0})")]
    BadDensity(f64),
    #[error("oracle needs r0 > 0 (got {0})")]
    BadScale(f64),
    #[error("invalid oracle parameter: {0}")]
    BadParameter(String),
    #[error("scale factor reached {r} at t = {t}")]
    Collapse { t: f64, r: f64 },
    #[error("time {t} outside the oracle window [0, {t_end}]")]
    OutOfRange { t: f64, t_end: f64 },
    #[error("oracle is one-dimensional")]
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineOracle {
    pub c: f64,
    pub kappa: f64,
    pub dt_ref: f64,
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub rdot: Vec<f64>,
}

fn accel(c: f64, kappa: f64, r: f64, rdot: f64) -> f64 {
    4.0 * c / (r * r) - 8.0 * c * kappa * rdot / (r * r * r)
}

/// Integrates the scale-factor ODE to `t_end` with step at most `dt_ref`.
pub fn affine_oracle(
    c: f64,
    r0: f64,
    rdot0: f64,
    t_end: f64,
    dt_ref: f64,
) -> Result<AffineOracle, OracleError> {
    affine_oracle_kappa(c, 0.0, r0, rdot0, t_end, dt_ref)
}

pub fn affine_oracle_kappa(
    c: f64,
    kappa: f64,
    r0: f64,
    rdot0: f64,
    t_end: f64,
    dt_ref: f64,
) -> Result<AffineOracle, OracleError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(OracleError::BadDensity(c));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(OracleError::BadScale(r0));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) || !rdot0.is_finite() {
        return Err(OracleError::BadParameter(format!(
            "kappa = {kappa}, rdot0 = {rdot0}"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) || !(dt_ref > 0.0 && dt_ref.is_finite()) {
        return Err(OracleError::BadParameter(format!(
            "t_end = {t_end}, dt_ref = {dt_ref}"
        )));
    }
    let steps = ((t_end / dt_ref) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut o = AffineOracle {
        c,
        kappa,
        dt_ref: h,
        times: vec![0.0],
        r: vec![r0],
        rdot: vec![rdot0],
    };
    let (mut r, mut p) = (r0, rdot0);
    let f = |r: f64, p: f64| (p, accel(c, kappa, r, p));
    for n in 1..=steps {
        let (k1r, k1p) = f(r, p);
        let (k2r, k2p) = f(r + 0.5 * h * k1r, p + 0.5 * h * k1p);
        let (k3r, k3p) = f(r + 0.5 * h * k2r, p + 0.5 * h * k2p);
        let (k4r, k4p) = f(r + h * k3r, p + h * k3p);
        r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        let t = n as f64 * h;
        if !(r > 0.0) || !r.is_finite() {
            return Err(OracleError::Collapse { t, r });
        }
        o.times.push(t);
        o.r.push(r);
        o.rdot.push(p);
    }
    Ok(o)
}

impl AffineOracle {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("oracle holds t = 0")
    }

    /// `(r, r')` at `t` by cubic Hermite interpolation.
    pub fn at(&self, t: f64) -> Result<(f64, f64), OracleError> {
        let t_end = self.t_end();
        if !(t >= -1e-12 && t <= t_end + 1e-12) {
            return Err(OracleError::OutOfRange { t, t_end });
        }
        let h = self.dt_ref;
        let k = ((t / h).floor() as usize).min(self.times.len().saturating_sub(2));
        if self.times.len() == 1 {
            return Ok((self.r[0], self.rdot[0]));
        }
        let s = ((t - self.times[k]) / h).clamp(0.0, 1.0);
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let (m0, m1) = (self.rdot[k] * h, self.rdot[k + 1] * h);
        let (s2, s3) = (s * s, s * s * s);
        let r = (2.0 * s3 - 3.0 * s2 + 1.0) * r0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * r1
            + (s3 - s2) * m1;
        let dr = ((6.0 * s2 - 6.0 * s) * r0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * r1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        Ok((r, dr))
    }

    /// `1/2 r'^2 + 4c/r`, conserved when `kappa = 0`.
    pub fn first_integral(&self, k: usize) -> f64 {
        0.5 * self.rdot[k] * self.rdot[k] + 4.0 * self.c / self.r[k]
    }

    /// Largest relative change of the first integral along the run.
    pub fn first_integral_drift(&self) -> f64 {
        let e0 = self.first_integral(0);
        (0..self.r.len())
            .map(|k| ((self.first_integral(k) - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn eta(&self, domain: &DiscreteDomain, t: f64) -> Result<VectorField, OracleError> {
        if domain.dim() != 1 {
            return Err(OracleError::Dimension);
        }
        let (r, _) = self.at(t)?;
        Ok(VectorField::from_fn(domain, |x| [0.5 + r * (x[0] - 0.5), 0.0, 0.0]))
    }

    pub fn velocity(&self, domain: &DiscreteDomain, t: f64) -> Result<VectorField, OracleError> {
        if domain.dim() != 1 {
            return Err(OracleError::Dimension);
        }
        let (_, p) = self.at(t)?;
        Ok(VectorField::from_fn(domain, |x| [p * (x[0] - 0.5), 0.0, 0.0]))
    }
}

/// Residual of the affine reduction of the momentum equation at `x` for
/// given `(r, r', r'')`, computed from the unreduced PDE by central
/// differences in `x`. Used to confirm the reduction before trusting it.
pub fn reduction_residual(c: f64, r: f64, rddot: f64, x: f64) -> f64 {
    let rho = |x: f64| c * x * (1.0 - x);
    // (rho0^2 eta_x^-2)_x with eta_x = r
    let flux = |x: f64| rho(x) * rho(x) / (r * r);
    let h = 1e-4;
    let dflux = (flux(x + h) - flux(x - h)) / (2.0 * h);
    rho(x) * rddot * (x - 0.5) + dflux
}
