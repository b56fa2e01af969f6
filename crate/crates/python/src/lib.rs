//! Python bindings for `physvac`.

use std::cell::RefCell;
use std::collections::BTreeMap;

use physvac::geometry::identity_suite;
use physvac::grid::DiscreteDomain;
use physvac::hardy::{self, InequalityReport};
use physvac::harness::config::RunConfig;
use physvac::harness::oracle::affine_oracle_kappa;
use physvac::harness::{run_case, simulate, HarnessError};
use physvac::kappa::Trajectory;
use physvac::parabolic::{decay_problem, manufactured_problem, solve_x, solve_x_galerkin};
use physvac::vacuum::{density_profile, DensityProfile, ProfileKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e.exit_code() {
        physvac::harness::EXIT_VALIDATION | physvac::harness::EXIT_USAGE => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn load_config(config: Option<&str>, overrides: Vec<String>) -> PyResult<RunConfig> {
    RunConfig::from_toml(config.unwrap_or(""), &overrides).map_err(harness_err)
}

/// Tensor-product grid: periodic horizontal axes, vertical axis in [0, 1].
#[pyclass(name = "Domain", frozen, skip_from_py_object)]
pub struct PyDomain {
    inner: DiscreteDomain,
}

#[pymethods]
impl PyDomain {
    #[new]
    #[pyo3(signature = (dim, n_horizontal, n_vertical))]
    fn new(dim: usize, n_horizontal: usize, n_vertical: usize) -> PyResult<Self> {
        DiscreteDomain::new(dim, n_horizontal, n_vertical)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn spacing(&self, axis: usize) -> PyResult<f64> {
        if axis >= self.inner.dim() {
            return Err(value_err(format!("axis {axis} out of range")));
        }
        Ok(self.inner.spacing(axis))
    }

    /// Node coordinates along `axis`, in storage order.
    fn coordinates(&self, axis: usize) -> PyResult<Vec<f64>> {
        if axis >= self.inner.dim() {
            return Err(value_err(format!("axis {axis} out of range")));
        }
        Ok((0..self.inner.len()).map(|i| self.inner.coordinate(i, axis)).collect())
    }

    /// Vertical coordinate of every node.
    fn heights(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.height(i)).collect()
    }

    fn integrate(&self, values: Vec<f64>) -> PyResult<f64> {
        self.inner.check_len(&values).map_err(value_err)?;
        Ok(self.inner.integrate(&values))
    }

    fn __repr__(&self) -> String {
        format!("Domain(dim={}, shape={:?})", self.inner.dim(), self.inner.shape())
    }
}

/// Equilibrium density with its physical vacuum estimate.
#[pyclass(name = "Profile", frozen)]
pub struct PyProfile {
    inner: DensityProfile,
}

#[pymethods]
impl PyProfile {
    #[staticmethod]
    #[pyo3(signature = (domain, gamma, c=1.0, modulation=0.0))]
    fn parabolic(domain: &PyDomain, gamma: f64, c: f64, modulation: f64) -> PyResult<Self> {
        density_profile(ProfileKind::Parabolic { c, modulation }, gamma, &domain.inner)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (domain, gamma, c=1.0))]
    fn linear_ramp(domain: &PyDomain, gamma: f64, c: f64) -> PyResult<Self> {
        density_profile(ProfileKind::LinearRamp { c }, gamma, &domain.inner)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn custom(domain: &PyDomain, gamma: f64, rho0: Vec<f64>) -> PyResult<Self> {
        density_profile(ProfileKind::Custom { rho0 }, gamma, &domain.inner)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn rho0(&self) -> Vec<f64> {
        self.inner.rho0.clone()
    }

    #[getter]
    fn vacuum_constant(&self) -> f64 {
        self.inner.vacuum.constant
    }

    #[getter]
    fn max_exponent(&self) -> f64 {
        self.inner.vacuum.max_exponent
    }
}

/// Stored samples of a run together with its energy reports.
#[pyclass(name = "Trajectory", frozen)]
pub struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// Flow map components of sample `k`.
    fn eta(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.samples.get(k).ok_or_else(|| value_err(format!("no sample {k}")))?;
        Ok(s.eta.comps[..self.inner.domain.dim()].to_vec())
    }

    /// Velocity components of sample `k`.
    fn velocity(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.samples.get(k).ok_or_else(|| value_err(format!("no sample {k}")))?;
        Ok(s.v.comps[..self.inner.domain.dim()].to_vec())
    }

    /// Energy series as a mapping from column name to values.
    fn energy(&self) -> BTreeMap<String, Vec<f64>> {
        let header = physvac::diagnostics::EnergyReport::csv_header();
        let names: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut out: BTreeMap<String, Vec<f64>> = names.iter().map(|n| (n.clone(), vec![])).collect();
        for r in &self.inner.reports {
            for (n, v) in names.iter().zip(r.csv_values()) {
                out.get_mut(n).expect("column").push(v);
            }
        }
        out
    }
}

/// Runs a configuration in memory. `config` is TOML text; `overrides` use `key=value`.
#[pyfunction]
#[pyo3(signature = (config=None, overrides=vec![]))]
fn run(py: Python<'_>, config: Option<&str>, overrides: Vec<String>) -> PyResult<PyTrajectory> {
    let cfg = load_config(config, overrides)?;
    let traj = py.detach(|| simulate(&cfg)).map_err(harness_err)?;
    Ok(PyTrajectory { inner: traj })
}

/// Runs a configuration and writes its outputs; returns the written paths.
#[pyfunction]
#[pyo3(signature = (out, config=None, overrides=vec![]))]
fn run_to_disk(py: Python<'_>, out: String, config: Option<&str>, mut overrides: Vec<String>) -> PyResult<Vec<String>> {
    overrides.push(format!("output.dir={}", toml::Value::String(out)));
    let cfg = load_config(config, overrides)?;
    let res = py.detach(|| run_case(&cfg)).map_err(harness_err)?;
    Ok(res.files.iter().map(|p| p.display().to_string()).collect())
}

/// Affine reference trajectory `(times, r, rdot)`.
#[pyfunction]
#[pyo3(signature = (c, r0=1.0, rdot0=0.0, t_end=1.0, dt_ref=1e-4, kappa=0.0))]
fn affine_oracle(c: f64, r0: f64, rdot0: f64, t_end: f64, dt_ref: f64, kappa: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let o = affine_oracle_kappa(c, kappa, r0, rdot0, t_end, dt_ref).map_err(value_err)?;
    Ok((o.times, o.r, o.rdot))
}

fn report_dict(r: &InequalityReport) -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("ratio", r.ratio),
        ("left", r.left),
        ("right", r.right),
        ("constant", r.constant_estimate),
    ])
}

/// Hardy ratio of nodal values `u` vanishing on the vacuum boundary.
#[pyfunction]
fn hardy_ratio(domain: &PyDomain, u: Vec<f64>, s: usize) -> PyResult<BTreeMap<&'static str, f64>> {
    hardy::hardy_ratio(&domain.inner, &u, s).map(|r| report_dict(&r)).map_err(value_err)
}

/// Weighted embedding ratio with weight `d^p`, `p` in {1, 2}.
#[pyfunction]
fn embedding_ratio(domain: &PyDomain, f: Vec<f64>, p: u32) -> PyResult<BTreeMap<&'static str, f64>> {
    hardy::weighted_embedding_ratio(&domain.inner, &f, p).map(|r| report_dict(&r)).map_err(value_err)
}

/// Refinement of the Hardy ratio for a named test function.
#[pyfunction]
#[pyo3(signature = (name, s, dim=1, base=64, levels=4))]
fn hardy_refinement(name: &str, s: usize, dim: usize, base: usize, levels: usize) -> PyResult<(Vec<f64>, f64)> {
    let r = hardy::hardy_refinement(name, s, dim, base, levels).map_err(value_err)?;
    Ok((r.history.clone(), r.spread()))
}

/// Solves `kappa f_t + f = g` pointwise; `g` is a callable of `t` returning a list.
/// Returns `(times, values, bound_constant)`.
#[pyfunction]
fn kelliptic(
    f0: Vec<f64>,
    g: Bound<'_, PyAny>,
    kappa: f64,
    dt: f64,
    t_end: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    let failure: RefCell<Option<PyErr>> = RefCell::new(None);
    let n = f0.len();
    let call = |t: f64| -> Vec<f64> {
        match g.call1((t,)).and_then(|v| v.extract::<Vec<f64>>()) {
            Ok(v) if v.len() == n => v,
            Ok(v) => {
                failure.borrow_mut().get_or_insert(value_err(format!("g returned {} values, expected {n}", v.len())));
                vec![0.0; n]
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![0.0; n]
            }
        }
    };
    let sol = hardy::kelliptic_solve(&f0, &call, kappa, dt, t_end).map_err(value_err)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let bound = sol.bound_constant();
    Ok((sol.times, sol.values, bound))
}

/// Manufactured degenerate parabolic solve on the frozen identity map.
/// Returns the max nodal error at `t_end`.
#[pyfunction]
#[pyo3(signature = (domain, kappa, dt, t_end, modes=None))]
fn xsolve_manufactured(domain: &PyDomain, kappa: f64, dt: f64, t_end: f64, modes: Option<usize>) -> PyResult<f64> {
    let d = &domain.inner;
    let profile = density_profile(ProfileKind::Parabolic { c: 1.0, modulation: 0.0 }, 2.0, d).map_err(value_err)?;
    let (prob, exact) = manufactured_problem(d, &profile, kappa).map_err(value_err)?;
    let sol = match modes {
        Some(m) => solve_x_galerkin(d, &prob, m, dt, t_end),
        None => solve_x(d, &prob, dt, t_end),
    }
    .map_err(value_err)?;
    let ex = exact(*sol.times.last().expect("initial time"));
    let last = sol.x.last().expect("initial value");
    Ok(last.iter().zip(&ex).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Unforced decay from `x0` on the frozen identity map.
/// Returns `(times, weighted_energy)`.
#[pyfunction]
fn xsolve_decay(profile: &PyProfile, domain: &PyDomain, kappa: f64, x0: Vec<f64>, dt: f64, t_end: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let prob = decay_problem(&domain.inner, &profile.inner, kappa, x0).map_err(value_err)?;
    let sol = solve_x(&domain.inner, &prob, dt, t_end).map_err(value_err)?;
    Ok((sol.times, sol.weighted_energy))
}

/// Discrete geometric identity residuals and their observed orders.
#[pyfunction]
#[pyo3(signature = (dim=3, n=16, levels=3))]
fn check_identities(dim: usize, n: usize, levels: usize) -> PyResult<BTreeMap<&'static str, f64>> {
    let s = identity_suite(dim, n, levels).map_err(value_err)?;
    let worst = |f: fn(&physvac::geometry::IdentityLevel) -> f64| s.levels.iter().map(f).fold(0.0, f64::max);
    Ok(BTreeMap::from([
        ("cofactor_error", worst(|l| l.cofactor_error)),
        ("piola_affine", worst(|l| l.piola_affine)),
        ("piola_order", s.piola_order),
        ("curlcurl_order", s.curlcurl_order),
        ("curl_gradient_order", s.curl_gradient_order),
    ]))
}

#[pymodule]
fn physvac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_disk, m)?)?;
    m.add_function(wrap_pyfunction!(affine_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(hardy_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(hardy_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(kelliptic, m)?)?;
    m.add_function(wrap_pyfunction!(xsolve_manufactured, m)?)?;
    m.add_function(wrap_pyfunction!(xsolve_decay, m)?)?;
    m.add_function(wrap_pyfunction!(check_identities, m)?)?;
    Ok(())
}
