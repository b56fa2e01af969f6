//! Tensor grids on the periodic slab `T^{dim-1} x (0,1)`.
//!
//! The last axis is always the vertical one. It carries endpoint nodes at
//! `0` and `1`, which together form the vacuum boundary. Every other axis is
//! periodic with unit period and no duplicated seam node.
//!
//! Nodes are stored in row-major order with the vertical index varying
//! fastest. Scalar fields are plain `Vec<f64>` of length [`DiscreteDomain::len`].

use rayon::prelude::*;
use thiserror::Error;

pub const MAX_DIM: usize = 3;
pub const MIN_NODES: usize = 4;

/// Node count above which per-node kernels run on the rayon pool.
const PAR_THRESHOLD: usize = 4096;

pub type ScalarField = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("{axis} axis needs at least {min} nodes (got {got})")]
    TooFewNodes {
        axis: &'static str,
        min: usize,
        got: usize,
    },
    #[error("axis {axis} is out of range for a {dim}-D domain")]
    BadAxis { axis: usize, dim: usize },
    #[error("derivative order {0} is not supported by the stencil set")]
    BadOrder(usize),
    #[error("field has {got} entries but the domain has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("weight field has a negative entry ({value}) at node {node}")]
    NegativeWeight { node: usize, value: f64 },
}

/// Which vertical face a boundary node sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Bottom,
    Top,
}

impl Face {
    /// Sign of the outward normal relative to the vertical unit vector.
    pub fn outward_sign(self) -> f64 {
        match self {
            Face::Bottom => -1.0,
            Face::Top => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain {
    dim: usize,
    shape: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    strides: [usize; MAX_DIM],
    len: usize,
    quad: Vec<f64>,
}

impl DiscreteDomain {
    /// Builds a uniform grid. `n_horizontal` is ignored in 1-D.
    pub fn new(dim: usize, n_horizontal: usize, n_vertical: usize) -> Result<Self, GridError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        if n_vertical < MIN_NODES {
            return Err(GridError::TooFewNodes {
                axis: "vertical",
                min: MIN_NODES,
                got: n_vertical,
            });
        }
        if dim > 1 && n_horizontal < MIN_NODES {
            return Err(GridError::TooFewNodes {
                axis: "horizontal",
                min: MIN_NODES,
                got: n_horizontal,
            });
        }

        let mut shape = [1; MAX_DIM];
        let mut spacing = [1.0; MAX_DIM];
        for a in 0..dim - 1 {
            shape[a] = n_horizontal;
            spacing[a] = 1.0 / n_horizontal as f64;
        }
        shape[dim - 1] = n_vertical;
        spacing[dim - 1] = 1.0 / (n_vertical - 1) as f64;

        let mut strides = [0; MAX_DIM];
        let mut stride = 1;
        for a in (0..dim).rev() {
            strides[a] = stride;
            stride *= shape[a];
        }
        let len = stride;

        let mut domain = Self {
            dim,
            shape,
            spacing,
            strides,
            len,
            quad: Vec::new(),
        };
        domain.quad = (0..len).map(|idx| domain.quad_weight_at(idx)).collect();
        Ok(domain)
    }

    fn quad_weight_at(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        for a in 0..self.dim {
            w *= self.spacing[a];
            if a == self.vertical_axis() {
                let j = self.axis_index(idx, a);
                if j == 0 || j + 1 == self.shape[a] {
                    w *= 0.5;
                }
            }
        }
        w
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vertical_axis(&self) -> usize {
        self.dim - 1
    }

    pub fn n_horizontal(&self) -> usize {
        if self.dim > 1 {
            self.shape[0]
        } else {
            0
        }
    }

    pub fn n_vertical(&self) -> usize {
        self.shape[self.dim - 1]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        axis < self.vertical_axis()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.shape[axis]
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for (a, slot) in m.iter_mut().enumerate().take(self.dim) {
            *slot = self.axis_index(idx, a);
        }
        m
    }

    pub fn node_from_multi(&self, m: &[usize]) -> usize {
        (0..self.dim).map(|a| m[a] * self.strides[a]).sum()
    }

    pub fn coordinate(&self, idx: usize, axis: usize) -> f64 {
        let i = self.axis_index(idx, axis);
        if axis == self.vertical_axis() {
            i as f64 / (self.shape[axis] - 1) as f64
        } else {
            i as f64 / self.shape[axis] as f64
        }
    }

    /// Node position; unused trailing slots are zero.
    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for (a, slot) in x.iter_mut().enumerate().take(self.dim) {
            *slot = self.coordinate(idx, a);
        }
        x
    }

    /// Vertical coordinate of a node.
    pub fn height(&self, idx: usize) -> f64 {
        self.coordinate(idx, self.vertical_axis())
    }

    /// Exact distance to the vacuum boundary on the slab.
    pub fn distance_to_boundary(&self, idx: usize) -> f64 {
        let z = self.height(idx);
        z.min(1.0 - z)
    }

    pub fn face_of(&self, idx: usize) -> Option<Face> {
        let j = self.axis_index(idx, self.vertical_axis());
        if j == 0 {
            Some(Face::Bottom)
        } else if j + 1 == self.n_vertical() {
            Some(Face::Top)
        } else {
            None
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.face_of(idx).is_some()
    }

    /// Nodes of one boundary face in storage order.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let j = match face {
            Face::Bottom => 0,
            Face::Top => self.n_vertical() - 1,
        };
        (0..self.len)
            .filter(|&idx| self.axis_index(idx, self.vertical_axis()) == j)
            .collect()
    }

    /// All boundary nodes, bottom face first.
    pub fn boundary_nodes(&self) -> Vec<(usize, Face)> {
        let mut out: Vec<_> = self
            .face_nodes(Face::Bottom)
            .into_iter()
            .map(|i| (i, Face::Bottom))
            .collect();
        out.extend(self.face_nodes(Face::Top).into_iter().map(|i| (i, Face::Top)));
        out
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Periodic neighbour along a horizontal axis, or `None` past a vertical endpoint.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.shape[axis] as isize;
        let i = self.axis_index(idx, axis) as isize;
        let j = i + offset;
        let j = if self.is_periodic(axis) {
            j.rem_euclid(n)
        } else if (0..n).contains(&j) {
            j
        } else {
            return None;
        };
        Some((idx as isize + (j - i) * self.strides[axis] as isize) as usize)
    }

    pub fn sample(&self, f: impl Fn(&[f64; MAX_DIM]) -> f64 + Sync) -> ScalarField {
        let mut out = vec![0.0; self.len];
        fill_nodes(&mut out, |idx| f(&self.position(idx)));
        out
    }

    pub fn check_len(&self, values: &[f64]) -> Result<(), GridError> {
        if values.len() != self.len {
            return Err(GridError::ShapeMismatch {
                expected: self.len,
                got: values.len(),
            });
        }
        Ok(())
    }

    fn check_axis(&self, axis: usize) -> Result<(), GridError> {
        if axis >= self.dim {
            return Err(GridError::BadAxis {
                axis,
                dim: self.dim,
            });
        }
        Ok(())
    }

    /// First or second derivative along `axis`.
    pub fn diff(&self, values: &[f64], axis: usize, order: usize) -> Result<ScalarField, GridError> {
        self.diff_with_jump(values, axis, order, 0.0)
    }

    /// Derivative of a field that is periodic up to an additive `jump` across the
    /// seam of a horizontal axis, `f(x + e_axis) = f(x) + jump`. The jump is
    /// ignored on the vertical axis.
    pub fn diff_with_jump(
        &self,
        values: &[f64],
        axis: usize,
        order: usize,
        jump: f64,
    ) -> Result<ScalarField, GridError> {
        self.check_axis(axis)?;
        self.check_len(values)?;
        if order != 1 && order != 2 {
            return Err(GridError::BadOrder(order));
        }
        let mut out = vec![0.0; self.len];
        let h = self.spacing[axis];
        let n = self.shape[axis];
        let s = self.strides[axis];
        let periodic = self.is_periodic(axis);
        fill_nodes(&mut out, |idx| {
            let i = self.axis_index(idx, axis);
            if periodic {
                let (up, up_jump) = if i + 1 == n {
                    (idx + s - n * s, jump)
                } else {
                    (idx + s, 0.0)
                };
                let (dn, dn_jump) = if i == 0 {
                    (idx + (n - 1) * s, -jump)
                } else {
                    (idx - s, 0.0)
                };
                let fp = values[up] + up_jump;
                let fm = values[dn] + dn_jump;
                if order == 1 {
                    (fp - fm) / (2.0 * h)
                } else {
                    (fp - 2.0 * values[idx] + fm) / (h * h)
                }
            } else {
                vertical_stencil(values, idx, i, n, s, h, order)
            }
        });
        Ok(out)
    }

    /// Mixed derivative `D^alpha f` composed from the basic stencils: each axis
    /// applies the second-order stencil `alpha[a] / 2` times and the first-order
    /// stencil once more when `alpha[a]` is odd. `jumps` gives the seam jump of
    /// the input along each horizontal axis; derivatives are seam-periodic.
    pub fn derivative(
        &self,
        values: &[f64],
        alpha: &[usize; MAX_DIM],
        jumps: &[f64; MAX_DIM],
    ) -> Result<ScalarField, GridError> {
        self.check_len(values)?;
        let mut cur = values.to_vec();
        let mut first = true;
        for a in 0..self.dim {
            let mut remaining = alpha[a];
            while remaining > 0 {
                let order = if remaining >= 2 { 2 } else { 1 };
                let jump = if first { jumps[a] } else { 0.0 };
                cur = self.diff_with_jump(&cur, a, order, jump)?;
                remaining -= order;
                // derivatives of a seam-shifted field are periodic
                first = false;
            }
        }
        Ok(cur)
    }

    /// All multi-indices of total order exactly `order`; with
    /// `horizontal_only` the vertical axis is excluded.
    pub fn multi_indices(&self, order: usize, horizontal_only: bool) -> Vec<[usize; MAX_DIM]> {
        let axes = if horizontal_only {
            self.dim - 1
        } else {
            self.dim
        };
        let mut out = Vec::new();
        if axes == 0 {
            if order == 0 {
                out.push([0; MAX_DIM]);
            }
            return out;
        }
        let mut alpha = [0; MAX_DIM];
        enumerate_indices(axes, 0, order, &mut alpha, &mut out);
        out
    }

    /// Quadrature integral.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.quad).map(|(v, w)| v * w).sum()
    }

    /// Discrete L2 norm.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        self.integrate_sq(values).sqrt()
    }

    pub fn integrate_sq(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.quad).map(|(v, w)| v * v * w).sum()
    }

    /// Squared `H^order` norm: sum over all multi-indices `|alpha| <= order`.
    pub fn sobolev_norm_sq(
        &self,
        values: &[f64],
        order: usize,
        jumps: &[f64; MAX_DIM],
    ) -> Result<f64, GridError> {
        let mut total = 0.0;
        for k in 0..=order {
            for alpha in self.multi_indices(k, false) {
                let d = self.derivative(values, &alpha, jumps)?;
                total += self.integrate_sq(&d);
            }
        }
        Ok(total)
    }

    /// `(sum_nodes sum_{|alpha| <= order} weight^power |D^alpha f|^2 quad)^{1/2}`.
    pub fn weighted_norm(
        &self,
        values: &[f64],
        weight: &[f64],
        weight_power: u32,
        derivative_order: usize,
    ) -> Result<f64, GridError> {
        self.check_len(values)?;
        self.check_len(weight)?;
        if derivative_order > 2 {
            return Err(GridError::BadOrder(derivative_order));
        }
        if let Some((node, &value)) = weight.iter().enumerate().find(|(_, &w)| w < 0.0) {
            return Err(GridError::NegativeWeight { node, value });
        }
        let wp: Vec<f64> = weight.iter().map(|w| w.powi(weight_power as i32)).collect();
        let mut total = 0.0;
        for k in 0..=derivative_order {
            for alpha in self.multi_indices(k, false) {
                let d = self.derivative(values, &alpha, &[0.0; MAX_DIM])?;
                total += d
                    .iter()
                    .zip(&wp)
                    .zip(&self.quad)
                    .map(|((d, w), q)| w * d * d * q)
                    .sum::<f64>();
            }
        }
        Ok(total.sqrt())
    }
}

fn vertical_stencil(
    values: &[f64],
    idx: usize,
    i: usize,
    n: usize,
    s: usize,
    h: f64,
    order: usize,
) -> f64 {
    let at = |k: isize| values[(idx as isize + k * s as isize) as usize];
    match (order, i) {
        (1, 0) => (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h),
        (1, i) if i + 1 == n => (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h),
        (1, _) => (at(1) - at(-1)) / (2.0 * h),
        (_, 0) => (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h),
        (_, i) if i + 1 == n => (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h),
        _ => (at(1) - 2.0 * at(0) + at(-1)) / (h * h),
    }
}

fn enumerate_indices(
    axes: usize,
    axis: usize,
    remaining: usize,
    alpha: &mut [usize; MAX_DIM],
    out: &mut Vec<[usize; MAX_DIM]>,
) {
    if axis + 1 == axes {
        alpha[axis] = remaining;
        out.push(*alpha);
        alpha[axis] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        alpha[axis] = k;
        enumerate_indices(axes, axis + 1, remaining - k, alpha, out);
    }
    alpha[axis] = 0;
}

/// Evaluates a per-node kernel into `out`. Each node is written independently,
/// so the result does not depend on the thread count.
pub(crate) fn fill_nodes(out: &mut [f64], f: impl Fn(usize) -> f64 + Sync + Send) {
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn one_d_nodes_and_spacing() {
        let d = DiscreteDomain::new(1, 0, 5).unwrap();
        let xs: Vec<f64> = (0..d.len()).map(|i| d.height(i)).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(d.spacing(0), 0.25);
    }

    #[test]
    fn two_d_wraparound() {
        let d = DiscreteDomain::new(2, 4, 5).unwrap();
        assert_eq!(d.shape(), &[4, 5]);
        assert_eq!(d.spacing(0), 0.25);
        let last = d.node_from_multi(&[3, 2]);
        let first = d.node_from_multi(&[0, 2]);
        assert_eq!(d.neighbor(last, 0, 1), Some(first));
        assert_eq!(d.neighbor(first, 0, -1), Some(last));
        let top = d.node_from_multi(&[1, 4]);
        assert_eq!(d.neighbor(top, 1, 1), None);
    }

    #[test]
    fn quadrature_sums_to_one() {
        for (dim, nh, nv) in [(1, 0, 5), (2, 4, 5), (3, 8, 9), (3, 5, 7)] {
            let d = DiscreteDomain::new(dim, nh, nv).unwrap();
            let s: f64 = d.quad_weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "dim {dim}: {s}");
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(
            DiscreteDomain::new(1, 0, 3),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(matches!(
            DiscreteDomain::new(2, 3, 8),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(matches!(
            DiscreteDomain::new(4, 8, 8),
            Err(GridError::BadDimension(4))
        ));
    }

    #[test]
    fn invalid_axis_and_order() {
        let d = DiscreteDomain::new(2, 4, 5).unwrap();
        let f = vec![0.0; d.len()];
        assert!(matches!(d.diff(&f, 2, 1), Err(GridError::BadAxis { .. })));
        assert!(matches!(d.diff(&f, 0, 3), Err(GridError::BadOrder(3))));
    }

    #[test]
    fn vertical_stencils_exact_on_quadratics() {
        let d = DiscreteDomain::new(2, 4, 7).unwrap();
        let lin = d.sample(|x| x[1]);
        let quad = d.sample(|x| x[1] * x[1]);
        for v in d.diff(&lin, 1, 1).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in d.diff(&quad, 1, 2).unwrap() {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_derivative_converges_second_order() {
        let err = |n: usize| {
            let d = DiscreteDomain::new(2, n, 5).unwrap();
            let f = d.sample(|x| (2.0 * PI * x[0]).sin());
            let df = d.diff(&f, 0, 1).unwrap();
            (0..d.len())
                .map(|i| (df[i] - 2.0 * PI * (2.0 * PI * d.coordinate(i, 0)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let ratio = e1 / e2;
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn seam_jump_reproduces_linear_maps() {
        let d = DiscreteDomain::new(2, 8, 5).unwrap();
        let f = d.sample(|x| 2.0 * x[0] + 0.5);
        let df = d.diff_with_jump(&f, 0, 1, 2.0).unwrap();
        assert!(df.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let d2 = d.diff_with_jump(&f, 0, 2, 2.0).unwrap();
        assert!(d2.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn weighted_norm_trivial_cases() {
        let d = DiscreteDomain::new(2, 8, 9).unwrap();
        let one = vec![1.0; d.len()];
        assert!((d.weighted_norm(&one, &one, 0, 0).unwrap() - 1.0).abs() < 1e-12);
        let zero = vec![0.0; d.len()];
        assert_eq!(d.weighted_norm(&zero, &one, 3, 2).unwrap(), 0.0);
        let mut neg = one.clone();
        neg[3] = -0.1;
        assert!(matches!(
            d.weighted_norm(&one, &neg, 1, 0),
            Err(GridError::NegativeWeight { node: 3, .. })
        ));
    }

    #[test]
    fn multi_index_counts() {
        let d = DiscreteDomain::new(3, 4, 5).unwrap();
        assert_eq!(d.multi_indices(2, false).len(), 6);
        assert_eq!(d.multi_indices(4, true).len(), 5);
        let d1 = DiscreteDomain::new(1, 0, 5).unwrap();
        assert!(d1.multi_indices(2, true).is_empty());
        assert_eq!(d1.multi_indices(0, true).len(), 1);
    }
}
