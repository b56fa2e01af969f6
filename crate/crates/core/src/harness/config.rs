//! TOML run configuration with `section.key=value` overrides.

use crate::geometry::VectorField;
use crate::grid::DiscreteDomain;
use crate::kappa::SolverConfig;
use crate::vacuum::{density_profile, mollify_initial_data, DensityProfile, ProfileKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    pub n_horizontal: usize,
    pub n_vertical: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            dim: 1,
            n_horizontal: 0,
            n_vertical: 129,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EosSpec {
    pub gamma: f64,
}

impl Default for EosSpec {
    fn default() -> Self {
        Self { gamma: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub kappa: f64,
    /// Fixed step; absent or non-positive selects the CFL step.
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub snapshot_stride: usize,
    pub max_steps: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            kappa: s.kappa,
            dt: 0.0,
            t_end: s.t_end,
            cfl: s.cfl,
            snapshot_stride: s.snapshot_stride,
            max_steps: s.max_steps,
        }
    }
}

/// Initial velocity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    /// `u = rate (z - 1/2) e_z`, affine in the vertical coordinate.
    Expansion { rate: f64 },
    /// Gradient of `phi = sin(2 pi x1) (1 + z^2) / 4 + (z - 1/2)^2 / 2`.
    Irrotational { amplitude: f64 },
    /// `u = amplitude sin(2 pi z) e_1`.
    Shear { amplitude: f64 },
    /// Gradient of a random horizontal Fourier sum times `1 + z^2`, drawn
    /// from the run seed.
    Random { amplitude: f64, modes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub energy_csv: bool,
    pub dumps: bool,
    /// Write every `dump_stride`-th stored sample.
    pub dump_stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("physvac-out"),
            energy_csv: true,
            dumps: true,
            dump_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySpec {
    pub kappas: Vec<f64>,
    pub levels: usize,
    /// Checkpoints on `(0, t_end]` where sweep velocities are compared.
    pub checkpoints: usize,
    pub hardy_function: String,
    pub hardy_order: usize,
    pub hardy_levels: usize,
    /// `manufactured` or `decay`.
    pub xsolve_case: String,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            kappas: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            levels: 3,
            checkpoints: 4,
            hardy_function: "sin".into(),
            hardy_order: 1,
            hardy_levels: 4,
            xsolve_case: "manufactured".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: DomainSpec,
    pub profile: ProfileKind,
    pub eos: EosSpec,
    pub solver: SolverSpec,
    pub initial: InitialSpec,
    /// Mollifier width for the initial data; zero disables smoothing.
    pub mollify_radius: f64,
    pub output: OutputSpec,
    pub study: StudySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domain: DomainSpec::default(),
            profile: ProfileKind::Parabolic {
                c: 1.0,
                modulation: 0.0,
            },
            eos: EosSpec::default(),
            solver: SolverSpec::default(),
            initial: InitialSpec::Zero,
            mollify_radius: 0.0,
            output: OutputSpec::default(),
            study: StudySpec::default(),
        }
    }
}

/// Parses `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `section.key=value` to a parsed table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(HarnessError::Config(format!("bad override key `{path}`")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("`{k}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let d = &self.domain;
        if !(1..=3).contains(&d.dim) {
            return bad(format!("domain.dim must be 1, 2 or 3 (got {})", d.dim));
        }
        if d.dim == 1 && d.n_horizontal > 1 {
            return bad("domain.n_horizontal must be 0 in one dimension".into());
        }
        if !(self.eos.gamma > 1.0 && self.eos.gamma.is_finite()) {
            return bad(format!("eos.gamma must exceed 1 (got {})", self.eos.gamma));
        }
        if !(self.mollify_radius >= 0.0) {
            return bad("mollify_radius must be >= 0".into());
        }
        if self.output.dump_stride == 0 {
            return bad("output.dump_stride must be positive".into());
        }
        self.solver_config().validate()?;
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            kappa: s.kappa,
            gamma: self.eos.gamma,
            dt: (s.dt > 0.0).then_some(s.dt),
            t_end: s.t_end,
            cfl: s.cfl,
            snapshot_stride: s.snapshot_stride,
            reports: true,
            max_steps: s.max_steps,
        }
    }

    pub fn build_domain(&self) -> Result<DiscreteDomain, HarnessError> {
        let d = &self.domain;
        Ok(DiscreteDomain::new(d.dim, d.n_horizontal, d.n_vertical)?)
    }

    pub fn build_profile(&self, domain: &DiscreteDomain) -> Result<DensityProfile, HarnessError> {
        Ok(density_profile(self.profile.clone(), self.eos.gamma, domain)?)
    }

    /// Domain, profile and initial velocity, mollified when requested.
    pub fn build(&self) -> Result<(DiscreteDomain, DensityProfile, VectorField), HarnessError> {
        let domain = self.build_domain()?;
        let mut profile = self.build_profile(&domain)?;
        let mut u0 = initial_velocity(&self.initial, &domain, self.seed);
        if self.mollify_radius > 0.0 {
            let (u, rho) =
                mollify_initial_data(&domain, &u0, &profile.rho0, self.eos.gamma, self.mollify_radius)?;
            u0 = u;
            profile = density_profile(ProfileKind::Custom { rho0: rho }, self.eos.gamma, &domain)?;
        }
        Ok((domain, profile, u0))
    }
}

pub fn initial_velocity(spec: &InitialSpec, domain: &DiscreteDomain, seed: u64) -> VectorField {
    let dim = domain.dim();
    let v = dim - 1;
    match *spec {
        InitialSpec::Zero => VectorField::zeros(domain),
        InitialSpec::Expansion { rate } => VectorField::from_fn(domain, |x| {
            let mut u = [0.0; 3];
            u[v] = rate * (x[v] - 0.5);
            u
        }),
        InitialSpec::Irrotational { amplitude: a } => VectorField::from_fn(domain, |x| {
            let z = x[v];
            let mut u = [0.0; 3];
            u[v] = a * (z - 0.5);
            if dim > 1 {
                let (s, c) = (2.0 * PI * x[0]).sin_cos();
                u[0] = a * 0.5 * PI * c * (1.0 + z * z);
                u[v] += a * 0.5 * s * z;
            }
            u
        }),
        InitialSpec::Shear { amplitude } => VectorField::from_fn(domain, |x| {
            let mut u = [0.0; 3];
            if dim > 1 {
                u[0] = amplitude * (2.0 * PI * x[v]).sin();
            }
            u
        }),
        InitialSpec::Random { amplitude, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coef: Vec<(f64, f64)> = (0..modes.max(1))
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            VectorField::from_fn(domain, |x| {
                // phi = (1 + z^2) sum_k (a_k cos + b_k sin)(2 pi k x1) / k^2
                let z = x[v];
                let mut u = [0.0; 3];
                if dim == 1 {
                    u[0] = amplitude * coef[0].0 * 2.0 * z;
                    return u;
                }
                let (mut phi, mut dphi) = (0.0, 0.0);
                for (k, (a, b)) in coef.iter().enumerate() {
                    let kk = (k + 1) as f64;
                    let (s, c) = (2.0 * PI * kk * x[0]).sin_cos();
                    phi += (a * c + b * s) / (kk * kk);
                    dphi += 2.0 * PI * (b * c - a * s) / kk;
                }
                u[0] = amplitude * dphi * (1.0 + z * z);
                u[v] = amplitude * phi * 2.0 * z;
                u
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(c, back);
        assert_eq!(RunConfig::from_toml("", &[]).unwrap(), c);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_toml(
            "[solver]\nkappa = 0.1\n",
            &[
                "solver.kappa=0.02".into(),
                "domain.dim=2".into(),
                "domain.n_horizontal=8".into(),
                "output.dir=elsewhere".into(),
                "initial.kind=\"shear\"".into(),
                "initial.amplitude=0.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.solver.kappa, 0.02);
        assert_eq!(c.domain.dim, 2);
        assert_eq!(c.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(c.initial, InitialSpec::Shear { amplitude: 0.5 });
    }

    #[test]
    fn rejects_inconsistent() {
        assert!(RunConfig::from_toml("[eos]\ngamma = 1.0\n", &[]).is_err());
        assert!(RunConfig::from_toml("[solver]\nkappa = -1.0\n", &[]).is_err());
        assert!(RunConfig::from_toml("[domain]\nbogus = 1\n", &[]).is_err());
        assert!(RunConfig::from_toml("", &["nokey".into()]).is_err());
    }

    #[test]
    fn uniform_density_rejected() {
        let c = RunConfig::from_toml(
            "[profile]\nkind = \"custom\"\nrho0 = [1.0, 1.0, 1.0, 1.0, 1.0]\n[domain]\nn_vertical = 5\n",
            &[],
        )
        .unwrap();
        assert!(c.build().is_err());
    }

    #[test]
    fn random_data_is_seeded() {
        let d = DiscreteDomain::new(2, 8, 9).unwrap();
        let spec = InitialSpec::Random {
            amplitude: 0.1,
            modes: 3,
        };
        assert_eq!(initial_velocity(&spec, &d, 7), initial_velocity(&spec, &d, 7));
        assert_ne!(initial_velocity(&spec, &d, 7), initial_velocity(&spec, &d, 8));
    }
}
