//! Numerical probes of the Hardy inequality `||u/d||_{s-1} <= C ||u||_s`, the
//! weighted embedding `||F||^2_{1-p/2} <= C int d^p (F^2 + |DF|^2)`, and the
//! scalar relaxation ODE `f + kappa f_t = g`.

use crate::grid::{DiscreteDomain, GridError, ScalarField};
use crate::vacuum::smoothed_distance;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_HARDY_ORDER: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardyError {
    #[error("u must vanish on the boundary (node {node} has {value})")]
    NotVanishing { node: usize, value: f64 },
    #[error("Sobolev order must be in 1..={MAX_HARDY_ORDER} (got {0})")]
    BadOrder(usize),
    #[error("embedding exponent must be 1 or 2 (got {0})")]
    BadExponent(u32),
    #[error("kappa must be positive (got {0})")]
    BadKappa(f64),
    #[error("invalid time stepping: dt = {dt}, t_end = {t_end}")]
    BadStep { dt: f64, t_end: f64 },
    #[error("unknown test function `{0}`")]
    UnknownFunction(String),
    #[error("need at least one refinement level")]
    NoLevels,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `left / right`, or zero when `degenerate`.
    pub ratio: f64,
    pub left: f64,
    pub right: f64,
    /// Largest ratio seen over `history`.
    pub constant_estimate: f64,
    /// Ratios at successive refinements, coarse to fine.
    pub history: Vec<f64>,
    pub degenerate: bool,
}

impl InequalityReport {
    fn single(left: f64, right: f64) -> Self {
        let degenerate = !(right > 0.0) || !(left > 0.0);
        let ratio = if degenerate { 0.0 } else { left / right };
        Self {
            ratio,
            left,
            right,
            constant_estimate: ratio,
            history: vec![ratio],
            degenerate,
        }
    }

    /// Spread of the history, `max/min - 1`.
    pub fn spread(&self) -> f64 {
        let max = self.history.iter().copied().fold(f64::MIN, f64::max);
        let min = self.history.iter().copied().fold(f64::MAX, f64::min);
        max / min - 1.0
    }
}

/// `u / d` with the smoothed distance; at boundary nodes the one-sided
/// derivative quotient `du/dn / dd/dn` is used.
pub fn distance_quotient(domain: &DiscreteDomain, u: &[f64]) -> Result<ScalarField, HardyError> {
    domain.check_len(u)?;
    let vert = domain.vertical_axis();
    let h = domain.spacing(vert);
    let mut out = vec![0.0; u.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let z = domain.height(i);
        if domain.is_boundary(i) {
            if u[i] != 0.0 {
                return Err(HardyError::NotVanishing {
                    node: i,
                    value: u[i],
                });
            }
            let (step, slope) = if z < 0.5 { (1, 1.0) } else { (-1, -1.0) };
            let n1 = domain.neighbor(i, vert, step).expect("vertical neighbour");
            let n2 = domain.neighbor(n1, vert, step).expect("vertical neighbour");
            // slope of u along +z, divided by that of d at the face
            let du = step as f64 * (-3.0 * u[i] + 4.0 * u[n1] - u[n2]) / (2.0 * h);
            *o = du / slope;
        } else {
            *o = u[i] / smoothed_distance(z).0;
        }
    }
    Ok(out)
}

/// `||u/d||_{s-1} / ||u||_s` on one grid.
pub fn hardy_ratio(domain: &DiscreteDomain, u: &[f64], s: usize) -> Result<InequalityReport, HardyError> {
    if !(1..=MAX_HARDY_ORDER).contains(&s) {
        return Err(HardyError::BadOrder(s));
    }
    let q = distance_quotient(domain, u)?;
    let left = domain.sobolev_norm_sq(&q, s - 1, &[0.0; 3])?.sqrt();
    let right = domain.sobolev_norm_sq(u, s, &[0.0; 3])?.sqrt();
    Ok(InequalityReport::single(left, right))
}

/// `||F||_0^{2(1-theta)} ||F||_1^{2 theta} / int d^p (F^2 + |DF|^2)` with
/// `theta = 1 - p/2` and the exact distance `d`.
pub fn weighted_embedding_ratio(
    domain: &DiscreteDomain,
    f: &[f64],
    p: u32,
) -> Result<InequalityReport, HardyError> {
    if p != 1 && p != 2 {
        return Err(HardyError::BadExponent(p));
    }
    domain.check_len(f)?;
    let theta = 1.0 - p as f64 / 2.0;
    let n0 = domain.sobolev_norm_sq(f, 0, &[0.0; 3])?;
    let n1 = domain.sobolev_norm_sq(f, 1, &[0.0; 3])?;
    let left = n0.powf(1.0 - theta) * n1.powf(theta);
    let mut grad_sq = vec![0.0; f.len()];
    for a in 0..domain.dim() {
        let df = domain.diff(f, a, 1)?;
        for (g, d) in grad_sq.iter_mut().zip(&df) {
            *g += d * d;
        }
    }
    let integrand: ScalarField = (0..f.len())
        .map(|i| domain.distance_to_boundary(i).powi(p as i32) * (f[i] * f[i] + grad_sq[i]))
        .collect();
    let right = domain.integrate(&integrand);
    Ok(InequalityReport::single(left, right))
}

/// Named test functions vanishing on the boundary.
pub const CORPUS: [&str; 5] = ["sin", "parabola", "distance", "cubic", "sin_modulated"];

pub fn corpus_function(
    name: &str,
    domain: &DiscreteDomain,
) -> Result<ScalarField, HardyError> {
    use std::f64::consts::PI;
    let vert = domain.vertical_axis();
    let f: fn(&[f64; 3], usize) -> f64 = match name {
        "sin" => |x, v| (PI * x[v]).sin(),
        "parabola" => |x, v| x[v] * (1.0 - x[v]),
        "distance" => |x, v| smoothed_distance(x[v]).0,
        "cubic" => |x, v| x[v] * (1.0 - x[v]) * (1.0 + x[v]),
        "sin_modulated" => |x, v| {
            let m = if v > 0 { 0.5 * (2.0 * PI * x[0]).cos() } else { 0.0 };
            (PI * x[v]).sin() * (1.0 + m)
        },
        other => return Err(HardyError::UnknownFunction(other.to_string())),
    };
    let mut u = domain.sample(|x| f(x, vert));
    for (i, _) in domain.boundary_nodes() {
        u[i] = 0.0;
    }
    Ok(u)
}

/// Hardy ratio of a corpus function on grids with `n_v = base * 2^l + 1`
/// vertical nodes.
pub fn hardy_refinement(
    name: &str,
    s: usize,
    dim: usize,
    base: usize,
    levels: usize,
) -> Result<InequalityReport, HardyError> {
    if levels == 0 {
        return Err(HardyError::NoLevels);
    }
    let mut history = Vec::with_capacity(levels);
    let mut last = None;
    for l in 0..levels {
        let n = base << l;
        let n_h = if dim > 1 { n } else { 0 };
        let domain = DiscreteDomain::new(dim, n_h, n + 1)?;
        let u = corpus_function(name, &domain)?;
        let r = hardy_ratio(&domain, &u, s)?;
        history.push(r.ratio);
        last = Some(r);
    }
    let mut report = last.expect("at least one level");
    report.constant_estimate = history.iter().copied().fold(0.0, f64::max);
    report.history = history;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KellipticSolution {
    pub times: Vec<f64>,
    pub values: Vec<ScalarField>,
    /// Largest `|g|` seen by the scheme.
    pub g_sup: f64,
}

impl KellipticSolution {
    /// `sup_t |f(t)| / max(|f(0)|, sup |g|)`.
    pub fn bound_constant(&self) -> f64 {
        let sup = |v: &ScalarField| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let f_sup = self.values.iter().map(sup).fold(0.0, f64::max);
        let denom = sup(&self.values[0]).max(self.g_sup);
        if denom == 0.0 {
            if f_sup == 0.0 { 1.0 } else { f64::INFINITY }
        } else {
            f_sup / denom
        }
    }
}

/// Solves `f + kappa f_t = g` nodewise with the exact integrating factor for
/// `g` frozen at each step midpoint.
pub fn kelliptic_solve(
    f0: &[f64],
    g: &dyn Fn(f64) -> ScalarField,
    kappa: f64,
    dt: f64,
    t_end: f64,
) -> Result<KellipticSolution, HardyError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(HardyError::BadKappa(kappa));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(HardyError::BadStep { dt, t_end });
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut sol = KellipticSolution {
        times: vec![0.0],
        values: vec![f0.to_vec()],
        g_sup: 0.0,
    };
    if steps == 0 {
        return Ok(sol);
    }
    let dt = t_end / steps as f64;
    let decay = (-dt / kappa).exp();
    let mut f = f0.to_vec();
    for n in 0..steps {
        let t = n as f64 * dt;
        let gm = g(t + 0.5 * dt);
        for (fi, gi) in f.iter_mut().zip(&gm) {
            sol.g_sup = sol.g_sup.max(gi.abs());
            *fi = gi + (*fi - gi) * decay;
        }
        sol.times.push(t + dt);
        sol.values.push(f.clone());
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_quotient_at_quarter() {
        let d = DiscreteDomain::new(1, 0, 9).unwrap();
        let u = corpus_function("parabola", &d).unwrap();
        let q = distance_quotient(&d, &u).unwrap();
        assert!((q[2] - 0.75).abs() < 1e-14);
        // one-sided quotient exact on quadratics
        assert!((q[0] - 1.0).abs() < 1e-12);
        assert!((q[8] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_quotient_is_one_near_faces() {
        let d = DiscreteDomain::new(1, 0, 33).unwrap();
        let u = corpus_function("distance", &d).unwrap();
        let q = distance_quotient(&d, &u).unwrap();
        for i in (0..=8).chain(24..=32) {
            assert!((q[i] - 1.0).abs() < 1e-12, "{i} {}", q[i]);
        }
        assert!(hardy_ratio(&d, &u, 1).unwrap().ratio.is_finite());
    }

    #[test]
    fn rejects_nonvanishing() {
        let d = DiscreteDomain::new(1, 0, 9).unwrap();
        assert!(matches!(
            hardy_ratio(&d, &[1.0; 9], 1),
            Err(HardyError::NotVanishing { .. })
        ));
        let u = corpus_function("sin", &d).unwrap();
        assert!(matches!(hardy_ratio(&d, &u, 4), Err(HardyError::BadOrder(4))));
        assert!(matches!(
            corpus_function("nope", &d),
            Err(HardyError::UnknownFunction(_))
        ));
    }

    #[test]
    fn embedding_constant_one() {
        let d = DiscreteDomain::new(1, 0, 1025).unwrap();
        let r = weighted_embedding_ratio(&d, &vec![1.0; d.len()], 2).unwrap();
        assert!((r.left - 1.0).abs() < 1e-12);
        assert!((r.right - 1.0 / 12.0).abs() < 1e-6);
        let z = weighted_embedding_ratio(&d, &vec![0.0; d.len()], 1).unwrap();
        assert!(z.degenerate && z.ratio == 0.0);
    }

    #[test]
    fn kelliptic_fixed_point_and_exponential() {
        let f0 = vec![2.0, -1.0, 0.5];
        let s = kelliptic_solve(&f0, &|_| vec![2.0, -1.0, 0.5], 0.3, 0.01, 1.0).unwrap();
        assert!(s.values.iter().all(|v| v == &f0));
        let s = kelliptic_solve(&[1.0], &|_| vec![3.0], 0.2, 0.01, 0.5).unwrap();
        for (t, v) in s.times.iter().zip(&s.values) {
            let exact = 3.0 + (1.0 - 3.0) * (-t / 0.2).exp();
            assert!((v[0] - exact).abs() < 1e-12);
        }
        assert!(s.bound_constant() <= 1.0 + 1e-12);
    }
}
