//! The linear degenerate parabolic problem for `X = rho0 J^-3 J_t`
//!
//! ```text
//! J^3 X_t / rho0 - 2 kappa [B^{jk} (rho0 X),_k / rho0],_j = G,   X = 0 on the boundary,
//! ```
//!
//! with frozen coefficients `B^{jk} = a[j][i] a[k][i]` and `J^3`.
//!
//! With `Z = rho0 X` and `T = B / rho0`, the elliptic part is discretized in
//! weak form: diagonal fluxes `T^{jj}` live on cell faces, where `rho0` is the
//! average of the two adjacent nodes and never vanishes, and cross terms use
//! centered differences at interior nodes. Scaling each row by `rho0` gives the
//! symmetric system
//!
//! ```text
//! (diag(J^3)/dt + 2 kappa R S R) X^{n+1} = J^3 X^n / dt + rho0 G^{n+1},   R = diag(rho0),
//! ```
//!
//! solved by Jacobi-preconditioned conjugate gradients.

use crate::geometry::{
    cofactor_rate, FlowState, GeometrySnapshot, TensorField, VectorField, ZERO3,
};
use crate::grid::{DiscreteDomain, GridError, ScalarField};
use crate::kappa::Trajectory;
use crate::vacuum::DensityProfile;
use nalgebra::{DMatrix, DVector, Matrix3};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XError {
    #[error("kappa must be positive (got {0})")]
    BadKappa(f64),
    #[error("coefficient matrix is not uniformly elliptic: min eigenvalue {lambda} at node {node}")]
    NotElliptic { node: usize, lambda: f64 },
    #[error("initial datum must vanish on the boundary (node {node} has {value})")]
    BoundaryData { node: usize, value: f64 },
    #[error("invalid time stepping: {0}")]
    BadStep(String),
    #[error("linear solve failed after {iterations} iterations (residual {residual:e})")]
    SolveFailed { iterations: usize, residual: f64 },
    #[error("flow map is not injective at t = {0}")]
    InvalidGeometry(f64),
    #[error("consistency check needs gamma = 2 (got {0})")]
    UnsupportedGamma(f64),
    #[error("trajectory needs at least 3 samples (got {0})")]
    ShortTrajectory(usize),
    #[error("Galerkin mode is one-dimensional")]
    GalerkinDim,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Time-dependent source `G(x, t)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Steady(ScalarField),
    /// `space(x) * exp(rate * t)`.
    Separable { space: ScalarField, rate: f64 },
    Function(Arc<dyn Fn(f64) -> ScalarField + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Steady(_) => write!(f, "Steady(..)"),
            Forcing::Separable { rate, .. } => write!(f, "Separable {{ rate: {rate} }}"),
            Forcing::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Forcing {
    pub fn at(&self, t: f64, n: usize) -> ScalarField {
        match self {
            Forcing::Zero => vec![0.0; n],
            Forcing::Steady(g) => g.clone(),
            Forcing::Separable { space, rate } => {
                let s = (rate * t).exp();
                space.iter().map(|g| g * s).collect()
            }
            Forcing::Function(f) => f(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct XProblem {
    /// Symmetric coefficient `B^{jk}`.
    pub b: TensorField,
    pub j_cubed: ScalarField,
    pub rho0: ScalarField,
    pub forcing: Forcing,
    pub kappa: f64,
    pub x0: ScalarField,
    /// Smallest eigenvalue of `B` over the grid.
    pub lambda: f64,
}

fn min_eigenvalue(b: &crate::geometry::Mat3, dim: usize) -> f64 {
    let mut m = Matrix3::<f64>::identity();
    for r in 0..dim {
        for s in 0..dim {
            m[(r, s)] = 0.5 * (b[r][s] + b[s][r]);
        }
    }
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

impl XProblem {
    pub fn new(
        domain: &DiscreteDomain,
        b: TensorField,
        j_cubed: ScalarField,
        rho0: ScalarField,
        forcing: Forcing,
        kappa: f64,
        x0: ScalarField,
    ) -> Result<Self, XError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(XError::BadKappa(kappa));
        }
        domain.check_len(&j_cubed)?;
        domain.check_len(&rho0)?;
        domain.check_len(&x0)?;
        if b.len() != domain.len() {
            return Err(GridError::ShapeMismatch {
                expected: domain.len(),
                got: b.len(),
            }
            .into());
        }
        let dim = domain.dim();
        let mut lambda = f64::INFINITY;
        for (node, m) in b.iter().enumerate() {
            let l = min_eigenvalue(m, dim);
            if !(l > 0.0) {
                return Err(XError::NotElliptic { node, lambda: l });
            }
            lambda = lambda.min(l);
        }
        for (node, &x) in x0.iter().enumerate() {
            if domain.is_boundary(node) && x != 0.0 {
                return Err(XError::BoundaryData { node, value: x });
            }
        }
        Ok(Self {
            b,
            j_cubed,
            rho0,
            forcing,
            kappa,
            x0,
            lambda,
        })
    }

    /// Coefficients frozen from a flow state: `B = a a^T`, `J^3`.
    pub fn frozen(
        domain: &DiscreteDomain,
        state: &FlowState,
        profile: &DensityProfile,
        forcing: Forcing,
        kappa: f64,
        x0: ScalarField,
    ) -> Result<Self, XError> {
        let snap = GeometrySnapshot::from_map(domain, &state.eta)?;
        if !snap.valid {
            return Err(XError::InvalidGeometry(state.time));
        }
        let dim = domain.dim();
        let b = snap
            .cof
            .iter()
            .map(|a| {
                let mut m = ZERO3;
                for j in 0..dim {
                    for k in 0..dim {
                        m[j][k] = (0..dim).map(|i| a[j][i] * a[k][i]).sum();
                    }
                }
                m
            })
            .collect();
        let j3 = snap.j.iter().map(|j| j * j * j).collect();
        Self::new(domain, b, j3, profile.rho0.clone(), forcing, kappa, x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XSolution {
    pub times: Vec<f64>,
    pub x: Vec<ScalarField>,
    /// `||X / sqrt(rho0)||_0` over interior nodes.
    pub weighted_energy: Vec<f64>,
    /// `||DX||_0`.
    pub gradient_norm: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// `||X / sqrt(rho0)||_0` summed over interior nodes.
pub fn weighted_energy(domain: &DiscreteDomain, x: &[f64], rho0: &[f64]) -> f64 {
    let q = domain.quad_weights();
    (0..domain.len())
        .filter(|&i| !domain.is_boundary(i))
        .map(|i| x[i] * x[i] / rho0[i] * q[i])
        .sum::<f64>()
        .sqrt()
}

fn gradient_norm(domain: &DiscreteDomain, x: &[f64]) -> Result<f64, GridError> {
    let mut total = 0.0;
    for a in 0..domain.dim() {
        total += domain.integrate_sq(&domain.diff(x, a, 1)?);
    }
    Ok(total.sqrt())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|p| self.vals[p] * x[self.cols[p]])
                .sum();
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&p| self.cols[p] == j)
            .map_or(0.0, |p| self.vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[p])] += self.vals[p];
            }
        }
        m
    }
}

/// Jacobi-preconditioned conjugate gradients; returns the iteration count.
pub fn conjugate_gradient(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, XError> {
    let n = a.n;
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    if dot(&r, &r).sqrt() <= tol * bnorm {
        return Ok(0);
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(XError::SolveFailed {
                iterations: it,
                residual: dot(&r, &r).sqrt() / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok(it);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(XError::SolveFailed {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Interior node numbering: `index[node]` is `Some(unknown)` off the boundary.
fn interior_index(domain: &DiscreteDomain) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut index = vec![None; domain.len()];
    let mut nodes = Vec::new();
    for (i, slot) in index.iter_mut().enumerate() {
        if !domain.is_boundary(i) {
            *slot = Some(nodes.len());
            nodes.push(i);
        }
    }
    (index, nodes)
}

/// Assembles `R S R` on the interior unknowns.
pub fn assemble_operator(domain: &DiscreteDomain, problem: &XProblem) -> Csr {
    let (index, nodes) = interior_index(domain);
    let dim = domain.dim();
    let rho = &problem.rho0;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    let mut add = |p: usize, q: usize, v: f64| {
        if let (Some(i), Some(j)) = (index[p], index[q]) {
            rows[i].push((j, v * rho[p] * rho[q]));
        }
    };

    for j in 0..dim {
        let h = domain.spacing(j);
        for p in 0..domain.len() {
            let Some(q) = domain.neighbor(p, j, 1) else {
                continue;
            };
            let rho_f = 0.5 * (rho[p] + rho[q]);
            let t = 0.5 * (problem.b[p][j][j] + problem.b[q][j][j]) / rho_f / (h * h);
            add(p, p, t);
            add(q, q, t);
            add(p, q, -t);
            add(q, p, -t);
        }
    }

    for &p in &nodes {
        for j in 0..dim {
            for k in 0..dim {
                if j == k {
                    continue;
                }
                let t = problem.b[p][j][k] / rho[p];
                if t == 0.0 {
                    continue;
                }
                let stencil = |axis: usize| -> [(usize, f64); 2] {
                    let h2 = 2.0 * domain.spacing(axis);
                    let up = domain.neighbor(p, axis, 1).expect("interior node");
                    let dn = domain.neighbor(p, axis, -1).expect("interior node");
                    [(up, 1.0 / h2), (dn, -1.0 / h2)]
                };
                for (a, wa) in stencil(j) {
                    for (b, wb) in stencil(k) {
                        add(a, b, t * wa * wb);
                    }
                }
            }
        }
    }
    Csr::from_rows(rows)
}

/// Implicit Euler system matrix `diag(J^3)/dt + 2 kappa R S R`.
pub fn system_matrix(domain: &DiscreteDomain, problem: &XProblem, dt: f64) -> Csr {
    let (_, nodes) = interior_index(domain);
    let mut m = assemble_operator(domain, problem);
    for (i, &p) in nodes.iter().enumerate() {
        for pos in m.row_ptr[i]..m.row_ptr[i + 1] {
            m.vals[pos] *= 2.0 * problem.kappa;
            if m.cols[pos] == i {
                m.vals[pos] += problem.j_cubed[p] / dt;
            }
        }
    }
    m
}

fn check_stepping(dt: f64, t_end: f64) -> Result<usize, XError> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(XError::BadStep(format!("dt = {dt}, t_end = {t_end}")));
    }
    Ok(((t_end / dt) - 1e-9).ceil().max(0.0) as usize)
}

/// Implicit Euler in time with the finite-difference operator. The step is
/// shortened so the last step lands on `t_end`.
pub fn solve_x(
    domain: &DiscreteDomain,
    problem: &XProblem,
    dt: f64,
    t_end: f64,
) -> Result<XSolution, XError> {
    let steps = check_stepping(dt, t_end)?;
    let n = domain.len();
    let mut sol = XSolution {
        times: vec![0.0],
        x: vec![problem.x0.clone()],
        weighted_energy: vec![weighted_energy(domain, &problem.x0, &problem.rho0)],
        gradient_norm: vec![gradient_norm(domain, &problem.x0)?],
        iterations: vec![0],
    };
    if steps == 0 {
        return Ok(sol);
    }
    let dt = t_end / steps as f64;
    let (_, nodes) = interior_index(domain);
    let a = system_matrix(domain, problem, dt);
    let mut x: Vec<f64> = nodes.iter().map(|&p| problem.x0[p]).collect();
    for s in 1..=steps {
        let t = s as f64 * dt;
        let g = problem.forcing.at(t, n);
        let rhs: Vec<f64> = nodes
            .iter()
            .zip(&x)
            .map(|(&p, &xi)| problem.j_cubed[p] * xi / dt + problem.rho0[p] * g[p])
            .collect();
        let iters = conjugate_gradient(&a, &rhs, &mut x, 1e-13, 20 * nodes.len() + 100)?;
        let mut full = vec![0.0; n];
        for (&p, &xi) in nodes.iter().zip(&x) {
            full[p] = xi;
        }
        sol.times.push(t);
        sol.weighted_energy
            .push(weighted_energy(domain, &full, &problem.rho0));
        sol.gradient_norm.push(gradient_norm(domain, &full)?);
        sol.x.push(full);
        sol.iterations.push(iters);
    }
    Ok(sol)
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Galerkin approximation in the Dirichlet sine basis `sin(m pi z)`,
/// `m = 1..=modes`, for one-dimensional problems. Coefficients are linearly
/// interpolated between nodes and integrated with five-point Gauss rules per
/// cell; time stepping is implicit Euler with dense solves.
pub fn solve_x_galerkin(
    domain: &DiscreteDomain,
    problem: &XProblem,
    modes: usize,
    dt: f64,
    t_end: f64,
) -> Result<XSolution, XError> {
    use std::f64::consts::PI;
    if domain.dim() != 1 {
        return Err(XError::GalerkinDim);
    }
    let steps = check_stepping(dt, t_end)?;
    let n = domain.len();
    let h = domain.spacing(0);
    let lerp = |f: &[f64], c: usize, s: f64| f[c] * (1.0 - s) + f[c + 1] * s;

    // quadrature points: (z, weight, cell, local coordinate)
    let mut pts = Vec::new();
    for c in 0..n - 1 {
        for &(xi, w) in &GAUSS5 {
            let s = 0.5 * (xi + 1.0);
            pts.push(((c as f64 + s) * h, 0.5 * w * h, c, s));
        }
    }
    let phi = |m: usize, z: f64| ((m as f64) * PI * z).sin();
    let dphi = |m: usize, z: f64| (m as f64) * PI * ((m as f64) * PI * z).cos();

    let mut mass = DMatrix::<f64>::zeros(modes, modes);
    let mut stiff = DMatrix::<f64>::zeros(modes, modes);
    let b11: Vec<f64> = problem.b.iter().map(|m| m[0][0]).collect();
    for &(z, w, c, s) in &pts {
        let rho = lerp(&problem.rho0, c, s);
        let drho = (problem.rho0[c + 1] - problem.rho0[c]) / h;
        let j3 = lerp(&problem.j_cubed, c, s);
        let b = lerp(&b11, c, s);
        for m in 0..modes {
            for k in 0..modes {
                let (pm, pk) = (phi(m + 1, z), phi(k + 1, z));
                mass[(m, k)] += w * j3 * pm * pk / rho;
                stiff[(m, k)] += w
                    * 2.0
                    * problem.kappa
                    * b
                    * (drho / rho * pk + dphi(k + 1, z))
                    * dphi(m + 1, z);
            }
        }
    }

    let project = |f: &[f64]| -> DVector<f64> {
        DVector::from_fn(modes, |m, _| {
            2.0 * pts
                .iter()
                .map(|&(z, w, c, s)| w * lerp(f, c, s) * phi(m + 1, z))
                .sum::<f64>()
        })
    };
    let load = |g: &[f64]| -> DVector<f64> {
        DVector::from_fn(modes, |m, _| {
            pts.iter()
                .map(|&(z, w, c, s)| w * lerp(g, c, s) * phi(m + 1, z))
                .sum::<f64>()
        })
    };
    let to_nodes = |coef: &DVector<f64>| -> ScalarField {
        (0..n)
            .map(|i| {
                if domain.is_boundary(i) {
                    0.0
                } else {
                    let z = domain.height(i);
                    (0..modes).map(|m| coef[m] * phi(m + 1, z)).sum()
                }
            })
            .collect()
    };

    let mut coef = project(&problem.x0);
    let x0 = to_nodes(&coef);
    let mut sol = XSolution {
        times: vec![0.0],
        weighted_energy: vec![weighted_energy(domain, &x0, &problem.rho0)],
        gradient_norm: vec![gradient_norm(domain, &x0)?],
        x: vec![x0],
        iterations: vec![0],
    };
    if steps == 0 {
        return Ok(sol);
    }
    let dt = t_end / steps as f64;
    let lhs = (&mass / dt + &stiff).lu();
    for s in 1..=steps {
        let t = s as f64 * dt;
        let g = problem.forcing.at(t, n);
        let rhs = &mass * &coef / dt + load(&g);
        coef = lhs.solve(&rhs).ok_or(XError::SolveFailed {
            iterations: 0,
            residual: f64::NAN,
        })?;
        let x = to_nodes(&coef);
        sol.times.push(t);
        sol.weighted_energy
            .push(weighted_energy(domain, &x, &problem.rho0));
        sol.gradient_norm.push(gradient_norm(domain, &x)?);
        sol.x.push(x);
        sol.iterations.push(modes);
    }
    Ok(sol)
}

/// `X = rho0 J^-3 a[s][r] D_s v^r`.
pub fn x_from_flow(
    domain: &DiscreteDomain,
    state: &FlowState,
    profile: &DensityProfile,
) -> Result<ScalarField, XError> {
    let snap = GeometrySnapshot::from_map(domain, &state.eta)?;
    if !snap.valid {
        return Err(XError::InvalidGeometry(state.time));
    }
    let dv = state.v.gradient(domain)?;
    let jt = snap.jacobian_rate(&dv);
    Ok((0..domain.len())
        .map(|i| profile.rho0[i] * jt[i] / snap.j[i].powi(3))
        .collect())
}

/// Manufactured problem at the identity map with `X* = e^{-t} z (1 - z)` and
/// `rho0 = z (1 - z)`, for which `G = (8 kappa - 1) e^{-t}`.
pub fn manufactured_problem(
    domain: &DiscreteDomain,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<(XProblem, impl Fn(f64) -> ScalarField), XError> {
    let state = FlowState::initial(domain, VectorField::zeros(domain));
    let vert = domain.vertical_axis();
    let base = domain.sample(|x| x[vert] * (1.0 - x[vert]));
    let forcing = Forcing::Separable {
        space: vec![8.0 * kappa - 1.0; domain.len()],
        rate: -1.0,
    };
    let problem = XProblem::frozen(domain, &state, profile, forcing, kappa, base.clone())?;
    let exact = move |t: f64| base.iter().map(|b| b * (-t).exp()).collect::<ScalarField>();
    Ok((problem, exact))
}

/// Residual of the nonlinear heat equation for `X` along a `gamma = 2`
/// trajectory, one value per sample: `||sqrt(rho0) (lhs - rhs)||_0` over
/// interior nodes. Time derivatives use three-point differences of samples.
///
/// All `1/rho0` factors are expanded first, `(rho0 X),_k / rho0 = X,_k +
/// rho0,_k J^-3 J_t` and `(rho0^2 J^-2),_k / rho0 = 2 rho0,_k J^-2 + rho0
/// (J^-2),_k`, so nothing is divided by the vanishing density.
pub fn consistency_check(
    traj: &Trajectory,
    profile: &DensityProfile,
    kappa: f64,
) -> Result<Vec<f64>, XError> {
    if (profile.gamma - 2.0).abs() > 1e-12 {
        return Err(XError::UnsupportedGamma(profile.gamma));
    }
    let n = traj.samples.len();
    if n < 3 {
        return Err(XError::ShortTrajectory(n));
    }
    let domain = &traj.domain;
    let geo: Vec<SampleTerms> = traj
        .samples
        .iter()
        .map(|s| SampleTerms::new(domain, s, profile))
        .collect::<Result<_, _>>()?;

    (0..n)
        .map(|i| {
            let start = i.saturating_sub(1).min(n - 3);
            let ts = [
                traj.samples[start].time,
                traj.samples[start + 1].time,
                traj.samples[start + 2].time,
            ];
            let t = traj.samples[i].time;
            let w = lagrange_first(ts, t);
            let yt: ScalarField = (0..domain.len())
                .map(|p| (0..3).map(|k| w[k] * geo[start + k].y[p]).sum())
                .collect();
            heat_residual(domain, &geo[i], &traj.samples[i], profile, kappa, &yt)
        })
        .collect()
}

fn lagrange_first(ts: [f64; 3], t: f64) -> [f64; 3] {
    let [t0, t1, t2] = ts;
    [
        (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2)),
        (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2)),
        (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1)),
    ]
}

struct SampleTerms {
    snap: GeometrySnapshot,
    dv: TensorField,
    jt: ScalarField,
    /// `J^-3 J_t`
    y: ScalarField,
}

impl SampleTerms {
    fn new(
        domain: &DiscreteDomain,
        state: &FlowState,
        _profile: &DensityProfile,
    ) -> Result<Self, XError> {
        let snap = GeometrySnapshot::from_map(domain, &state.eta)?;
        if !snap.valid {
            return Err(XError::InvalidGeometry(state.time));
        }
        let dv = state.v.gradient(domain)?;
        let jt = snap.jacobian_rate(&dv);
        let y = jt
            .iter()
            .zip(&snap.j)
            .map(|(jt, j)| jt / j.powi(3))
            .collect();
        Ok(Self { snap, dv, jt, y })
    }
}

fn heat_residual(
    domain: &DiscreteDomain,
    g: &SampleTerms,
    state: &FlowState,
    profile: &DensityProfile,
    kappa: f64,
    yt: &[f64],
) -> Result<f64, XError> {
    let dim = domain.dim();
    let n = domain.len();
    let rho = &profile.rho0;
    let drho = &profile.grad_rho0.comps;
    let snap = &g.snap;
    let adot = cofactor_rate(domain, snap, &state.v)?;

    let x: ScalarField = (0..n).map(|p| rho[p] * g.y[p]).collect();
    let jm2: ScalarField = snap.j.iter().map(|j| j.powi(-2)).collect();
    let f: ScalarField = (0..n).map(|p| rho[p] / snap.j[p]).collect();
    let dx: Vec<ScalarField> = (0..dim)
        .map(|k| domain.diff(&x, k, 1))
        .collect::<Result<_, _>>()?;
    let djm2: Vec<ScalarField> = (0..dim)
        .map(|k| domain.diff(&jm2, k, 1))
        .collect::<Result<_, _>>()?;
    let df: Vec<ScalarField> = (0..dim)
        .map(|k| domain.diff(&f, k, 1))
        .collect::<Result<_, _>>()?;

    let mut res: ScalarField = (0..n)
        .map(|p| {
            let j = snap.j[p];
            let mut r = j * j * j * yt[p];
            // + 3 J^-1 J_t^2 - adot[j][i] D_j v^i
            r += 3.0 * g.jt[p] * g.jt[p] / j;
            for i in 0..dim {
                for jj in 0..dim {
                    r -= adot[p][jj][i] * g.dv[p][i][jj];
                }
            }
            r
        })
        .collect();

    for j in 0..dim {
        let mut heat = vec![0.0; n];
        let mut visc = vec![0.0; n];
        let mut press = vec![0.0; n];
        for p in 0..n {
            let a = &snap.cof[p];
            let ainv = &snap.inv[p];
            for k in 0..dim {
                let mut bjk = 0.0;
                let mut cjk = 0.0;
                let mut ejk = 0.0;
                for i in 0..dim {
                    bjk += a[j][i] * a[k][i];
                    cjk += a[j][i] * adot[p][k][i];
                    ejk += a[j][i] * ainv[k][i];
                }
                heat[p] += bjk * (dx[k][p] + drho[k][p] * g.y[p]);
                visc[p] += cjk * (2.0 * drho[k][p] * jm2[p] + rho[p] * djm2[k][p]);
                press[p] += ejk * df[k][p];
            }
        }
        let dh = domain.diff(&heat, j, 1)?;
        let dvisc = domain.diff(&visc, j, 1)?;
        let dp = domain.diff(&press, j, 1)?;
        for p in 0..n {
            res[p] += -2.0 * kappa * dh[p] + kappa * dvisc[p] + 2.0 * dp[p];
        }
    }

    let q = domain.quad_weights();
    Ok((0..n)
        .filter(|&p| !domain.is_boundary(p))
        .map(|p| rho[p] * res[p] * res[p] * q[p])
        .sum::<f64>()
        .sqrt())
}

/// Convenience: the frozen-coefficient problem at the identity with a
/// user initial datum, zero forcing.
pub fn decay_problem(
    domain: &DiscreteDomain,
    profile: &DensityProfile,
    kappa: f64,
    x0: ScalarField,
) -> Result<XProblem, XError> {
    let state = FlowState::initial(domain, VectorField::zeros(domain));
    XProblem::frozen(domain, &state, profile, Forcing::Zero, kappa, x0)
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn x_from_flow_examples() {
        let d = DiscreteDomain::new(2, 8, 17).unwrap();
        let p = parabolic(&d);
        let mut s = FlowState::initial(&d, VectorField::from_fn(&d, |x| [0.0, x[1], 0.0]));
        let x = x_from_flow(&d, &s, &p).unwrap();
        for i in 0..d.len() {
            let z = d.height(i);
            assert!((x[i] - z * (1.0 - z)).abs() < 1e-12);
        }
        s.v = VectorField::zeros(&d);
        assert!(x_from_flow(&d, &s, &p).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_data_stays_zero() {
        let d = DiscreteDomain::new(1, 0, 33).unwrap();
        let p = parabolic(&d);
        let prob = decay_problem(&d, &p, 0.1, vec![0.0; d.len()]).unwrap();
        let sol = solve_x(&d, &prob, 0.01, 0.1).unwrap();
        assert!(sol.x.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn system_is_symmetric_positive_definite() {
        let d = DiscreteDomain::new(2, 6, 7).unwrap();
        let p = parabolic(&d);
        let eta = crate::geometry::perturbed_map(&d, 0.05);
        let state = FlowState {
            eta,
            ..FlowState::initial(&d, VectorField::zeros(&d))
        };
        let x0 = vec![0.0; d.len()];
        let prob = XProblem::frozen(&d, &state, &p, Forcing::Zero, 0.1, x0).unwrap();
        let m = system_matrix(&d, &prob, 0.01).to_dense();
        assert!((&m - m.transpose()).abs().max() < 1e-10 * m.abs().max());
        let eig = m.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e > 0.0));
    }

    #[test]
    fn rejects_bad_problems() {
        let d = DiscreteDomain::new(1, 0, 9).unwrap();
        let p = parabolic(&d);
        assert!(matches!(
            decay_problem(&d, &p, 0.0, vec![0.0; d.len()]),
            Err(XError::BadKappa(_))
        ));
        assert!(matches!(
            decay_problem(&d, &p, 0.1, vec![1.0; d.len()]),
            Err(XError::BoundaryData { .. })
        ));
        let b = vec![ZERO3; d.len()];
        assert!(matches!(
            XProblem::new(
                &d,
                b,
                vec![1.0; d.len()],
                p.rho0.clone(),
                Forcing::Zero,
                0.1,
                vec![0.0; d.len()]
            ),
            Err(XError::NotElliptic { .. })
        ));
    }

    #[test]
    fn galerkin_tracks_finite_differences() {
        let d = DiscreteDomain::new(1, 0, 129).unwrap();
        let p = parabolic(&d);
        let (prob, exact) = manufactured_problem(&d, &p, 0.05).unwrap();
        let g = solve_x_galerkin(&d, &prob, 12, 1e-3, 0.1).unwrap();
        let ex = exact(0.1);
        let err = g.x.last().unwrap().iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }
}
