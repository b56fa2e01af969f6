//! Lagrangian geometry of a flow map: deformation gradient, Jacobian,
//! inverse, cofactor, boundary metric, and the differentiation identities
//! they satisfy.
//!
//! Index convention: `d_eta[r][s] = D_s eta^r`, and for the inverse `A` and the
//! cofactor `a` the first index is the reference (derivative) index, so
//! `div_eta w = A[j][i] D_j w^i` and `a[k][i] = J A[k][i]`.

use crate::grid::{fill_nodes, DiscreteDomain, Face, GridError, ScalarField, MAX_DIM};

pub type Mat3 = [[f64; MAX_DIM]; MAX_DIM];
pub type TensorField = Vec<Mat3>;

pub const ZERO3: Mat3 = [[0.0; MAX_DIM]; MAX_DIM];

pub fn identity3(dim: usize) -> Mat3 {
    let mut m = ZERO3;
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = 1.0;
    }
    m
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Determinant of the leading `dim x dim` block.
pub fn det(m: &Mat3, dim: usize) -> f64 {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Adjugate of the leading block, built from explicit minors.
pub fn adjugate(m: &Mat3, dim: usize) -> Mat3 {
    let mut a = ZERO3;
    match dim {
        1 => a[0][0] = 1.0,
        2 => {
            a[0][0] = m[1][1];
            a[0][1] = -m[0][1];
            a[1][0] = -m[1][0];
            a[1][1] = m[0][0];
        }
        _ => {
            for (k, row) in a.iter_mut().enumerate() {
                for (i, slot) in row.iter_mut().enumerate() {
                    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                    let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
                    *slot = m[i1][k1] * m[i2][k2] - m[i1][k2] * m[i2][k1];
                }
            }
        }
    }
    a
}

pub fn matmul(a: &Mat3, b: &Mat3, dim: usize) -> Mat3 {
    let mut c = ZERO3;
    for i in 0..dim {
        for j in 0..dim {
            c[i][j] = (0..dim).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Vector-valued nodal field stored component-wise.
///
/// `shift[r][a]` is the jump of component `r` across the periodic seam of
/// horizontal axis `a`: `w^r(x + e_a) = w^r(x) + shift[r][a]`. The identity map
/// has `shift = I` on the horizontal block; periodic fields have zero shift.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: Vec<ScalarField>,
    pub shift: Mat3,
}

impl VectorField {
    pub fn zeros(domain: &DiscreteDomain) -> Self {
        Self {
            comps: vec![vec![0.0; domain.len()]; domain.dim()],
            shift: ZERO3,
        }
    }

    /// Samples `f` at every node; the result is taken to be seam-periodic.
    pub fn from_fn(
        domain: &DiscreteDomain,
        f: impl Fn(&[f64; MAX_DIM]) -> [f64; MAX_DIM] + Sync,
    ) -> Self {
        let comps = (0..domain.dim())
            .map(|r| domain.sample(|x| f(x)[r]))
            .collect();
        Self {
            comps,
            shift: ZERO3,
        }
    }

    pub fn with_shift(mut self, shift: Mat3) -> Self {
        self.shift = shift;
        self
    }

    /// The identity map `e(x) = x`.
    pub fn identity(domain: &DiscreteDomain) -> Self {
        Self::affine(domain, &identity3(domain.dim()), &[0.0; MAX_DIM])
    }

    /// `x -> M x + b`, with the seam shifts of a linear map.
    pub fn affine(domain: &DiscreteDomain, m: &Mat3, b: &[f64; MAX_DIM]) -> Self {
        let dim = domain.dim();
        let field = Self::from_fn(domain, |x| {
            let mut y = [0.0; MAX_DIM];
            for r in 0..dim {
                y[r] = b[r] + (0..dim).map(|s| m[r][s] * x[s]).sum::<f64>();
            }
            y
        });
        let mut shift = ZERO3;
        for r in 0..dim {
            for a in 0..dim.saturating_sub(1) {
                shift[r][a] = m[r][a];
            }
        }
        field.with_shift(shift)
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (r, c) in self.comps.iter().enumerate() {
            out[r] = c[idx];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
            && self.shift.iter().flatten().all(|v| v.is_finite())
    }

    /// `self += alpha * other`, seam shifts included.
    pub fn axpy(&mut self, alpha: f64, other: &VectorField) {
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in c.iter_mut().zip(o) {
                *x += alpha * y;
            }
        }
        for (row, orow) in self.shift.iter_mut().zip(&other.shift) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += alpha * y;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            c.iter_mut().for_each(|x| *x *= alpha);
        }
        out.shift.iter_mut().flatten().for_each(|x| *x *= alpha);
        out
    }

    /// `self + alpha * other` as a new field.
    pub fn plus(&self, alpha: f64, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(alpha, other);
        out
    }

    /// `grad[r][s] = D_s w^r` at every node.
    pub fn gradient(&self, domain: &DiscreteDomain) -> Result<TensorField, GridError> {
        let dim = domain.dim();
        let mut cols = vec![vec![Vec::new(); dim]; dim];
        for r in 0..dim {
            for s in 0..dim {
                let jump = if domain.is_periodic(s) {
                    self.shift[r][s]
                } else {
                    0.0
                };
                cols[r][s] = domain.diff_with_jump(&self.comps[r], s, 1, jump)?;
            }
        }
        Ok(assemble_tensor(domain.len(), dim, |r, s, idx| cols[r][s][idx]))
    }

    /// Quadrature L2 norm of the pointwise Euclidean magnitude.
    pub fn l2_norm(&self, domain: &DiscreteDomain) -> f64 {
        self.comps
            .iter()
            .map(|c| domain.integrate_sq(c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn assemble_tensor(
    len: usize,
    dim: usize,
    f: impl Fn(usize, usize, usize) -> f64,
) -> TensorField {
    (0..len)
        .map(|idx| {
            let mut m = ZERO3;
            for (r, row) in m.iter_mut().enumerate().take(dim) {
                for (s, slot) in row.iter_mut().enumerate().take(dim) {
                    *slot = f(r, s, idx);
                }
            }
            m
        })
        .collect()
}

/// Extracts entry `(r, s)` of a tensor field as a scalar field.
pub fn tensor_entry(t: &TensorField, r: usize, s: usize) -> ScalarField {
    t.iter().map(|m| m[r][s]).collect()
}

/// Per-node maximum absolute value over the `dim x dim` block.
pub fn tensor_max_abs(t: &TensorField, dim: usize) -> f64 {
    t.iter()
        .flat_map(|m| m.iter().take(dim).flat_map(move |row| row.iter().take(dim)))
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// One time level of the Lagrangian flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub eta: VectorField,
    pub v: VectorField,
    /// Lagged specific pressure force `q = w / rho0` from the previous step.
    pub q_prev: VectorField,
    pub time: f64,
}

impl FlowState {
    /// `(eta, v) = (e, u0)` at `t = 0`; `q_prev` is filled by the solver.
    pub fn initial(domain: &DiscreteDomain, u0: VectorField) -> Self {
        Self {
            eta: VectorField::identity(domain),
            v: u0,
            q_prev: VectorField::zeros(domain),
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.v.is_finite() && self.q_prev.is_finite()
    }
}

/// Metric data at one node of the vacuum boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub node: usize,
    pub face: Face,
    pub sqrt_g: f64,
    /// Outward unit normal to the deformed boundary.
    pub normal: [f64; MAX_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySnapshot {
    pub dim: usize,
    pub d_eta: TensorField,
    pub j: ScalarField,
    /// `A = (D eta)^{-1}`; meaningful only when `valid`.
    pub inv: TensorField,
    /// Cofactor `a = J A = adj(D eta)`.
    pub cof: TensorField,
    pub boundary: Vec<BoundaryPoint>,
    pub valid: bool,
    pub j_min: f64,
    pub j_max: f64,
}

impl GeometrySnapshot {
    pub fn from_map(domain: &DiscreteDomain, eta: &VectorField) -> Result<Self, GridError> {
        let dim = domain.dim();
        let d_eta = eta.gradient(domain)?;
        let cof: TensorField = d_eta.iter().map(|m| adjugate(m, dim)).collect();
        let j: ScalarField = d_eta.iter().map(|m| det(m, dim)).collect();
        let inv = cof
            .iter()
            .zip(&j)
            .map(|(a, &jj)| {
                let mut m = ZERO3;
                for k in 0..dim {
                    for i in 0..dim {
                        m[k][i] = a[k][i] / jj;
                    }
                }
                m
            })
            .collect();
        let j_min = j.iter().copied().fold(f64::INFINITY, f64::min);
        let j_max = j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let valid = j_min > 0.0 && j.iter().all(|v| v.is_finite());

        let vert = domain.vertical_axis();
        let boundary = domain
            .boundary_nodes()
            .into_iter()
            .map(|(node, face)| {
                let row = cof[node][vert];
                let sqrt_g = row.iter().take(dim).map(|x| x * x).sum::<f64>().sqrt();
                let mut normal = [0.0; MAX_DIM];
                if sqrt_g > 0.0 {
                    for i in 0..dim {
                        normal[i] = face.outward_sign() * row[i] / sqrt_g;
                    }
                }
                BoundaryPoint {
                    node,
                    face,
                    sqrt_g,
                    normal,
                }
            })
            .collect();

        Ok(Self {
            dim,
            d_eta,
            j,
            inv,
            cof,
            boundary,
            valid,
            j_min,
            j_max,
        })
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    /// Largest relative deviation of `a D eta` and `D eta a` from `J I`.
    pub fn cofactor_identity_error(&self) -> f64 {
        let dim = self.dim;
        let mut worst: f64 = 0.0;
        for ((a, m), &jj) in self.cof.iter().zip(&self.d_eta).zip(&self.j) {
            let scale = jj.abs().max(1.0);
            for p in [matmul(a, m, dim), matmul(m, a, dim)] {
                for r in 0..dim {
                    for s in 0..dim {
                        let target = if r == s { jj } else { 0.0 };
                        worst = worst.max((p[r][s] - target).abs() / scale);
                    }
                }
            }
        }
        worst
    }

    /// `P[k][j] = sum_r D_r w^k A[r][j]`, the Eulerian gradient of `w` pulled back.
    pub fn eulerian_gradient(
        &self,
        domain: &DiscreteDomain,
        w: &VectorField,
    ) -> Result<TensorField, GridError> {
        let dw = w.gradient(domain)?;
        let dim = self.dim;
        Ok(dw
            .iter()
            .zip(&self.inv)
            .map(|(g, a)| matmul(g, a, dim))
            .collect())
    }

    /// `J_t = a[s][r] D_s v^r`.
    pub fn jacobian_rate(&self, dv: &TensorField) -> ScalarField {
        let dim = self.dim;
        self.cof
            .iter()
            .zip(dv)
            .map(|(a, g)| {
                let mut s = 0.0;
                for r in 0..dim {
                    for k in 0..dim {
                        s += a[k][r] * g[r][k];
                    }
                }
                s
            })
            .collect()
    }
}

pub fn snapshot(domain: &DiscreteDomain, state: &FlowState) -> Result<GeometrySnapshot, GridError> {
    GeometrySnapshot::from_map(domain, &state.eta)
}

/// `sum_k D_k a[k][i]` for each `i`.
pub fn piola_residual(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
) -> Result<VectorField, GridError> {
    let dim = snap.dim;
    let mut out = VectorField::zeros(domain);
    for i in 0..dim {
        for k in 0..dim {
            let d = domain.diff(&tensor_entry(&snap.cof, k, i), k, 1)?;
            out.comps[i].iter_mut().zip(&d).for_each(|(o, x)| *o += x);
        }
    }
    Ok(out)
}

pub fn lagrangian_div(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    w: &VectorField,
) -> Result<ScalarField, GridError> {
    let p = snap.eulerian_gradient(domain, w)?;
    Ok(p.iter().map(|m| (0..snap.dim).map(|i| m[i][i]).sum()).collect())
}

/// Pointwise curl of an Eulerian gradient tensor `p[k][j] = d w^k / d eta^j`.
/// In 2-D the scalar curl goes in the last component; 1-D curls vanish.
pub(crate) fn curl_of(p: &Mat3, dim: usize) -> [f64; MAX_DIM] {
    let mut c = [0.0; MAX_DIM];
    match dim {
        1 => {}
        2 => c[1] = p[1][0] - p[0][1],
        _ => {
            for (i, slot) in c.iter_mut().enumerate() {
                for j in 0..3 {
                    for k in 0..3 {
                        *slot += levi_civita(i, j, k) * p[k][j];
                    }
                }
            }
        }
    }
    c
}

pub fn lagrangian_curl(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    w: &VectorField,
) -> Result<VectorField, GridError> {
    let p = snap.eulerian_gradient(domain, w)?;
    let dim = snap.dim;
    let mut out = VectorField::zeros(domain);
    for (idx, m) in p.iter().enumerate() {
        let c = curl_of(m, dim);
        for r in 0..dim {
            out.comps[r][idx] = c[r];
        }
    }
    Ok(out)
}

/// `M[r][s][k][i] = J^{-1}(a[s][r] a[k][i] - a[s][i] a[k][r])` at one node, so
/// that `d/dt a[k][i] = D_s v^r M[r][s][k][i]`.
fn rate_kernel(a: &Mat3, j: f64, dim: usize) -> [[Mat3; MAX_DIM]; MAX_DIM] {
    let mut m = [[ZERO3; MAX_DIM]; MAX_DIM];
    for r in 0..dim {
        for s in 0..dim {
            for k in 0..dim {
                for i in 0..dim {
                    m[r][s][k][i] = (a[s][r] * a[k][i] - a[s][i] * a[k][r]) / j;
                }
            }
        }
    }
    m
}

/// Time derivative of the cofactor along `eta_t = v`.
pub fn cofactor_rate(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    v: &VectorField,
) -> Result<TensorField, GridError> {
    let dv = v.gradient(domain)?;
    Ok(cofactor_rate_from_gradient(snap, &dv))
}

pub(crate) fn cofactor_rate_from_gradient(snap: &GeometrySnapshot, dv: &TensorField) -> TensorField {
    let dim = snap.dim;
    (0..snap.len())
        .map(|idx| {
            let a = &snap.cof[idx];
            let g = &dv[idx];
            let jj = snap.j[idx];
            let jt: f64 = (0..dim)
                .flat_map(|r| (0..dim).map(move |s| (r, s)))
                .map(|(r, s)| g[r][s] * a[s][r])
                .sum();
            let adva = matmul(&matmul(a, g, dim), a, dim);
            let mut out = ZERO3;
            for k in 0..dim {
                for i in 0..dim {
                    out[k][i] = (jt * a[k][i] - adva[k][i]) / jj;
                }
            }
            out
        })
        .collect()
}

/// Residual of the curl-curl identity: the left side `D_j(d_t a[k][i]) a[j][i]`
/// minus the flat `curl curl v`, the deviation term and the lower-order term.
/// Second derivatives of `v` are composed first-derivative stencils.
pub fn curlcurl_identity_residual(
    domain: &DiscreteDomain,
    snap: &GeometrySnapshot,
    v: &VectorField,
) -> Result<VectorField, GridError> {
    let dim = snap.dim;
    let n = domain.len();
    let dv = v.gradient(domain)?;
    let rate = cofactor_rate_from_gradient(snap, &dv);

    // ddv[r][s][j] = D_j D_s v^r
    let mut ddv = vec![vec![vec![Vec::new(); dim]; dim]; dim];
    for r in 0..dim {
        for s in 0..dim {
            let col = tensor_entry(&dv, r, s);
            for j in 0..dim {
                ddv[r][s][j] = domain.diff(&col, j, 1)?;
            }
        }
    }

    let kernels: Vec<_> = (0..n)
        .map(|idx| rate_kernel(&snap.cof[idx], snap.j[idx], dim))
        .collect();

    let mut out = VectorField::zeros(domain);
    for k in 0..dim {
        let mut res = vec![0.0; n];
        for i in 0..dim {
            let rate_ki = tensor_entry(&rate, k, i);
            for j in 0..dim {
                let d = domain.diff(&rate_ki, j, 1)?;
                for idx in 0..n {
                    res[idx] += d[idx] * snap.cof[idx][j][i];
                }
            }
        }

        // flat curl curl v = D_k div v - sum_j D_j D_j v^k
        for idx in 0..n {
            let mut cc = 0.0;
            for r in 0..dim {
                cc += ddv[r][r][k][idx];
            }
            for j in 0..dim {
                cc -= ddv[k][j][j][idx];
            }
            res[idx] -= cc;
        }

        for r in 0..dim {
            for s in 0..dim {
                for i in 0..dim {
                    let m_col: ScalarField = kernels.iter().map(|m| m[r][s][k][i]).collect();
                    for j in 0..dim {
                        let dm = domain.diff(&m_col, j, 1)?;
                        let flat = if j == i {
                            let mut f = 0.0;
                            if s == r && k == i {
                                f += 1.0;
                            }
                            if s == i && k == r {
                                f -= 1.0;
                            }
                            f
                        } else {
                            0.0
                        };
                        for idx in 0..n {
                            let aji = snap.cof[idx][j][i];
                            let dev = ddv[r][s][j][idx] * (m_col[idx] * aji - flat);
                            let low = dv[idx][r][s] * dm[idx] * aji;
                            res[idx] -= dev + low;
                        }
                    }
                }
            }
        }
        out.comps[k] = res;
    }
    Ok(out)
}

/// Maximum-norm results of the geometric identity checks on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityLevel {
    pub n: usize,
    pub h: f64,
    pub cofactor_error: f64,
    pub piola_affine: f64,
    pub piola_smooth: f64,
    pub curlcurl: f64,
    pub pullback_gradient_curl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentitySuite {
    pub dim: usize,
    pub levels: Vec<IdentityLevel>,
    pub piola_order: f64,
    pub curlcurl_order: f64,
    pub curl_gradient_order: f64,
}

impl IdentitySuite {
    pub fn cofactor_ok(&self) -> bool {
        self.levels.iter().all(|l| l.cofactor_error <= 1e-10)
    }

    pub fn piola_affine_ok(&self) -> bool {
        self.levels.iter().all(|l| l.piola_affine <= 1e-11)
    }

    /// Piola converges at order 1.8 or better; in 2-D the discrete residual
    /// already vanishes to roundoff because mixed stencils commute.
    pub fn piola_ok(&self) -> bool {
        self.piola_order >= 1.8 || self.levels.iter().all(|l| l.piola_smooth <= 1e-10)
    }

    pub fn curlcurl_ok(&self) -> bool {
        self.curlcurl_order >= 1.8 || self.levels.iter().all(|l| l.curlcurl <= 1e-10)
    }

    pub fn passed(&self) -> bool {
        self.cofactor_ok() && self.piola_affine_ok() && self.piola_ok() && self.curlcurl_ok()
    }
}

/// Perturbed map used by the identity suite.
pub fn perturbed_map(domain: &DiscreteDomain, eps: f64) -> VectorField {
    use std::f64::consts::PI;
    let dim = domain.dim();
    let id = VectorField::identity(domain);
    let pert = VectorField::from_fn(domain, |x| {
        let z = x[dim - 1];
        let mut p = [0.0; MAX_DIM];
        match dim {
            1 => p[0] = 0.3 * (PI * z).sin() * z,
            2 => {
                p[0] = (2.0 * PI * x[0]).sin() * z * (1.0 - z);
                p[1] = (2.0 * PI * x[0]).sin();
            }
            _ => {
                p[0] = (2.0 * PI * x[0]).sin() * z * (1.0 - z);
                p[1] = 0.5 * (2.0 * PI * x[1]).cos() * z;
                p[2] = (2.0 * PI * x[0]).sin() + 0.5 * (2.0 * PI * x[1]).sin() * z;
            }
        }
        p
    });
    id.plus(eps, &pert)
}

/// Smooth periodic velocity used by the identity suite.
pub fn smooth_velocity(domain: &DiscreteDomain) -> VectorField {
    use std::f64::consts::PI;
    let dim = domain.dim();
    VectorField::from_fn(domain, |x| {
        let z = x[dim - 1];
        let mut v = [0.0; MAX_DIM];
        let h = if dim > 1 { (2.0 * PI * x[0]).sin() } else { 1.0 };
        let h2 = if dim > 2 { (2.0 * PI * x[1]).cos() } else { 1.0 };
        v[0] = h * (PI * z).cos() + z * z;
        if dim > 1 {
            v[1] = h2 * (PI * z).sin() * (1.0 + 0.5 * h);
        }
        if dim > 2 {
            v[2] = z * (1.0 - z) * h + 0.3 * (2.0 * PI * x[1]).sin();
        }
        v
    })
}

/// Least-squares slope of `log err` against `log h`.
pub fn fit_order(h: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(&hh, &e)| hh > 0.0 && e > 0.0)
        .map(|(hh, e)| (hh.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn identity_level(dim: usize, n: usize) -> Result<IdentityLevel, GridError> {
    use std::f64::consts::PI;
    let domain = DiscreteDomain::new(dim, n, n + 1)?;
    let eta = perturbed_map(&domain, 0.05);
    let snap = GeometrySnapshot::from_map(&domain, &eta)?;

    let mut m = identity3(dim);
    for r in 0..dim {
        for s in 0..dim {
            m[r][s] += 0.1 * ((r + 2 * s) as f64 * 0.7).sin();
        }
    }
    let affine = VectorField::affine(&domain, &m, &[0.3, -0.2, 0.1]);
    let snap_aff = GeometrySnapshot::from_map(&domain, &affine)?;

    let v = smooth_velocity(&domain);
    let cc = curlcurl_identity_residual(&domain, &snap, &v)?;

    // curl of the pulled-back gradient of phi
    let phi = domain.sample(|x| {
        let h = if dim > 1 { (2.0 * PI * x[0]).cos() } else { 1.0 };
        (PI * x[dim - 1]).sin() * h
    });
    let mut grad = VectorField::zeros(&domain);
    for kk in 0..dim {
        let d = domain.diff(&phi, kk, 1)?;
        for i in 0..dim {
            for idx in 0..domain.len() {
                grad.comps[i][idx] += snap.inv[idx][kk][i] * d[idx];
            }
        }
    }
    let cg = lagrangian_curl(&domain, &snap, &grad)?;

    Ok(IdentityLevel {
        n,
        h: domain.min_spacing(),
        cofactor_error: snap
            .cofactor_identity_error()
            .max(snap_aff.cofactor_identity_error()),
        piola_affine: piola_residual(&domain, &snap_aff)?.max_abs(),
        piola_smooth: piola_residual(&domain, &snap)?.max_abs(),
        curlcurl: cc.max_abs(),
        pullback_gradient_curl: cg.max_abs(),
    })
}

/// Runs the identity checks on `levels` grids `n, 2n, 4n, ...`.
pub fn identity_suite(dim: usize, n: usize, levels: usize) -> Result<IdentitySuite, GridError> {
    let levels: Vec<IdentityLevel> = (0..levels)
        .map(|l| identity_level(dim, n << l))
        .collect::<Result<_, _>>()?;
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let order = |f: fn(&IdentityLevel) -> f64| {
        fit_order(&h, &levels.iter().map(f).collect::<Vec<_>>())
    };
    Ok(IdentitySuite {
        dim,
        piola_order: order(|l| l.piola_smooth),
        curlcurl_order: order(|l| l.curlcurl),
        curl_gradient_order: order(|l| l.pullback_gradient_curl),
        levels,
    })
}

/// Nodewise determinant check used by tests: `J` against a direct evaluation.
pub fn determinant_mismatch(snap: &GeometrySnapshot) -> f64 {
    let dim = snap.dim;
    let mut worst: f64 = 0.0;
    let mut buf = vec![0.0; snap.len()];
    fill_nodes(&mut buf, |idx| {
        let direct = det(&snap.d_eta[idx], dim);
        (direct - snap.j[idx]).abs() / direct.abs().max(1.0)
    });
    for b in buf {
        worst = worst.max(b);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_map_geometry() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let s = GeometrySnapshot::from_map(&d, &VectorField::identity(&d)).unwrap();
        assert!(s.valid);
        for idx in 0..d.len() {
            assert!(close(s.j[idx], 1.0, 1e-12));
            for r in 0..3 {
                for c in 0..3 {
                    let t = if r == c { 1.0 } else { 0.0 };
                    assert!(close(s.d_eta[idx][r][c], t, 1e-12));
                    assert!(close(s.cof[idx][r][c], t, 1e-12));
                    assert!(close(s.inv[idx][r][c], t, 1e-12));
                }
            }
        }
        for b in &s.boundary {
            let expect = if b.face == Face::Top { 1.0 } else { -1.0 };
            assert!(close(b.normal[2], expect, 1e-12));
            assert!(close(b.sqrt_g, 1.0, 1e-12));
        }
    }

    #[test]
    fn diagonal_scaling() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let mut m = ZERO3;
        m[0][0] = 2.0;
        m[1][1] = 3.0;
        m[2][2] = 4.0;
        let s = GeometrySnapshot::from_map(&d, &VectorField::affine(&d, &m, &[0.0; 3])).unwrap();
        for idx in 0..d.len() {
            assert!(close(s.j[idx], 24.0, 1e-10));
            assert!(close(s.cof[idx][0][0], 12.0, 1e-10));
            assert!(close(s.cof[idx][1][1], 8.0, 1e-10));
            assert!(close(s.cof[idx][2][2], 6.0, 1e-10));
        }
    }

    #[test]
    fn jacobian_matches_direct_determinant() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let eta = VectorField::identity(&d).plus(
            0.01,
            &VectorField::from_fn(&d, |x| [(2.0 * PI * x[0]).sin(), 0.0, 0.0]),
        );
        let s = GeometrySnapshot::from_map(&d, &eta).unwrap();
        assert!(determinant_mismatch(&s) < 1e-14);
        assert!(s.cofactor_identity_error() < 1e-12);
    }

    #[test]
    fn inverted_map_is_flagged() {
        let d = DiscreteDomain::new(1, 0, 9).unwrap();
        let eta = VectorField::identity(&d).scaled(-1.0);
        let s = GeometrySnapshot::from_map(&d, &eta).unwrap();
        assert!(!s.valid);
    }

    #[test]
    fn piola_exact_for_affine() {
        for dim in 1..=3 {
            let d = DiscreteDomain::new(dim, 8, 9).unwrap();
            let mut m = identity3(dim);
            m[0][dim - 1] += 0.3;
            m[dim - 1][0] -= 0.2;
            let s = GeometrySnapshot::from_map(&d, &VectorField::affine(&d, &m, &[0.1; 3])).unwrap();
            assert!(piola_residual(&d, &s).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_and_curl_at_identity() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let s = GeometrySnapshot::from_map(&d, &VectorField::identity(&d)).unwrap();
        let w = VectorField::identity(&d);
        assert!(lagrangian_div(&d, &s, &w).unwrap().iter().all(|v| close(*v, 3.0, 1e-12)));

        let rot = VectorField::from_fn(&d, |x| [-x[1], x[0], 0.0]).with_shift({
            let mut sh = ZERO3;
            sh[0][1] = -1.0;
            sh[1][0] = 1.0;
            sh
        });
        let c = lagrangian_curl(&d, &s, &rot).unwrap();
        assert!(c.comps[2].iter().all(|v| close(*v, 2.0, 1e-12)));
        assert!(c.comps[0].iter().all(|v| v.abs() < 1e-12));

        let s2 = GeometrySnapshot::from_map(&d, &VectorField::identity(&d).scaled(2.0)).unwrap();
        let c2 = lagrangian_curl(&d, &s2, &rot).unwrap();
        assert!(c2.comps[2].iter().all(|v| close(*v, 1.0, 1e-12)));
        let wx = VectorField::from_fn(&d, |x| [x[0], 0.0, 0.0]).with_shift({
            let mut sh = ZERO3;
            sh[0][0] = 1.0;
            sh
        });
        assert!(lagrangian_div(&d, &s2, &wx).unwrap().iter().all(|v| close(*v, 0.5, 1e-12)));
    }

    #[test]
    fn two_d_curl_sits_in_last_component() {
        let d = DiscreteDomain::new(2, 8, 9).unwrap();
        let s = GeometrySnapshot::from_map(&d, &VectorField::identity(&d)).unwrap();
        let rot = VectorField::from_fn(&d, |x| [-x[1], x[0], 0.0]).with_shift({
            let mut sh = ZERO3;
            sh[1][0] = 1.0;
            sh
        });
        let c = lagrangian_curl(&d, &s, &rot).unwrap();
        assert!(c.comps[1].iter().all(|v| close(*v, 2.0, 1e-12)));
        assert!(c.comps[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cofactor_rate_at_identity() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let s = GeometrySnapshot::from_map(&d, &VectorField::identity(&d)).unwrap();
        let v = VectorField::from_fn(&d, |x| [x[0], 0.0, 0.0]).with_shift({
            let mut sh = ZERO3;
            sh[0][0] = 1.0;
            sh
        });
        let r = cofactor_rate(&d, &s, &v).unwrap();
        for m in &r {
            assert!(close(m[0][0], 0.0, 1e-12));
            assert!(close(m[1][1], 1.0, 1e-12));
            assert!(close(m[2][2], 1.0, 1e-12));
        }
        let zero = cofactor_rate(&d, &s, &VectorField::zeros(&d)).unwrap();
        assert_eq!(tensor_max_abs(&zero, 3), 0.0);
    }

    #[test]
    fn cofactor_rate_matches_time_difference() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let eta = perturbed_map(&d, 0.05);
        let v = smooth_velocity(&d);
        let s = GeometrySnapshot::from_map(&d, &eta).unwrap();
        let rate = cofactor_rate(&d, &s, &v).unwrap();
        let tau = 1e-4;
        let sp = GeometrySnapshot::from_map(&d, &eta.plus(tau, &v)).unwrap();
        let sm = GeometrySnapshot::from_map(&d, &eta.plus(-tau, &v)).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for idx in 0..d.len() {
            for k in 0..3 {
                for i in 0..3 {
                    let fd = (sp.cof[idx][k][i] - sm.cof[idx][k][i]) / (2.0 * tau);
                    num = num.max((fd - rate[idx][k][i]).abs());
                    den = den.max(rate[idx][k][i].abs());
                }
            }
        }
        assert!(num / den < 1e-5, "{}", num / den);
    }

    #[test]
    fn curlcurl_vanishes_for_zero_velocity() {
        let d = DiscreteDomain::new(3, 8, 9).unwrap();
        let s = GeometrySnapshot::from_map(&d, &perturbed_map(&d, 0.05)).unwrap();
        let r = curlcurl_identity_residual(&d, &s, &VectorField::zeros(&d)).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn fit_order_on_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!(close(fit_order(&h, &e), 2.0, 1e-12));
    }
}
