//! Kappa sweeps and grid refinement studies.

use super::config::{InitialSpec, RunConfig};
use super::io::write_csv;
use super::oracle::affine_oracle_kappa;
use super::{simulate, HarnessError};
use crate::geometry::{fit_order, VectorField};
use crate::kappa::Trajectory;
use crate::vacuum::ProfileKind;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub parameter: f64,
    pub metrics: BTreeMap<String, f64>,
    /// `--set` assignments reproducing this row with `run`.
    pub overrides: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedOrder {
    pub metric: String,
    pub order: f64,
    pub points: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub name: String,
    pub parameter: String,
    /// Sorted by ascending parameter.
    pub rows: Vec<StudyRow>,
    pub orders: Vec<FittedOrder>,
}

impl StudyResult {
    pub fn metric(&self, name: &str) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.metrics.get(name).copied()).collect()
    }

    pub fn order(&self, metric: &str) -> Option<f64> {
        self.orders.iter().find(|o| o.metric == metric).map(|o| o.order)
    }

    /// Matched-time velocity differences in sweep order (largest kappa first).
    pub fn differences(&self) -> Vec<f64> {
        self.rows
            .iter()
            .rev()
            .filter_map(|r| r.metrics.get("velocity_difference").copied())
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut names: Vec<&String> = self.rows.iter().flat_map(|r| r.metrics.keys()).collect();
        names.sort();
        names.dedup();
        let mut header = vec![self.parameter.clone()];
        header.extend(names.iter().map(|s| s.to_string()));
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.parameter];
                v.extend(names.iter().map(|n| r.metrics.get(*n).copied().unwrap_or(f64::NAN)));
                v
            })
            .collect();
        write_csv(std::fs::File::create(path)?, &header.join(","), &rows)?;
        Ok(())
    }
}

/// Velocity at time `t` by linear interpolation between stored samples.
pub fn velocity_at(traj: &Trajectory, t: f64) -> Option<VectorField> {
    let s = &traj.samples;
    let k = s.iter().position(|x| x.time >= t - 1e-12)?;
    if (s[k].time - t).abs() <= 1e-12 || k == 0 {
        return Some(s[k].v.clone());
    }
    let (a, b) = (&s[k - 1], &s[k]);
    let w = (t - a.time) / (b.time - a.time);
    Some(a.v.scaled(1.0 - w).plus(w, &b.v))
}

fn summary(traj: &Trajectory) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("steps".into(), traj.steps as f64);
    m.insert("t_final".into(), traj.last().time);
    if let Some(r) = traj.reports.last() {
        m.insert("final_physical_energy".into(), r.physical_energy);
    }
    let fold = |f: fn(&crate::diagnostics::EnergyReport) -> f64, init: f64, op: fn(f64, f64) -> f64| {
        traj.reports.iter().map(f).fold(init, op)
    };
    if !traj.reports.is_empty() {
        m.insert("max_e_total".into(), fold(|r| r.e_total, f64::MIN, f64::max));
        m.insert("max_curl_residual".into(), fold(|r| r.curl_residual, 0.0, f64::max));
        m.insert("max_piola_residual".into(), fold(|r| r.piola_residual_max, 0.0, f64::max));
        m.insert("j_min".into(), fold(|r| r.j_min, f64::MAX, f64::min));
        m.insert("j_max".into(), fold(|r| r.j_max, f64::MIN, f64::max));
    }
    m
}

/// Runs `base` for each kappa (non-increasing, at least three) and compares
/// velocities of neighbouring runs at `study.checkpoints` matched times.
pub fn kappa_sweep(base: &RunConfig, kappas: &[f64]) -> Result<StudyResult, HarnessError> {
    if kappas.len() < 3 {
        return Err(HarnessError::Config(format!(
            "kappa sweep needs at least 3 values (got {})",
            kappas.len()
        )));
    }
    if kappas.windows(2).any(|w| !(w[1] <= w[0])) || kappas.iter().any(|k| !(*k >= 0.0)) {
        return Err(HarnessError::Config(
            "kappa sweep values must be non-negative and decreasing".into(),
        ));
    }
    base.validate()?;
    let runs: Vec<Result<Trajectory, String>> = kappas
        .par_iter()
        .map(|&k| {
            let mut cfg = base.clone();
            cfg.solver.kappa = k;
            simulate(&cfg).map_err(|e| e.to_string())
        })
        .collect();

    let t_end = base.solver.t_end;
    let m = base.study.checkpoints.max(1);
    let checkpoints: Vec<f64> = (1..=m).map(|k| t_end * k as f64 / m as f64).collect();
    let mut rows = Vec::with_capacity(kappas.len());
    for (i, (&kappa, res)) in kappas.iter().zip(&runs).enumerate() {
        let mut row = StudyRow {
            parameter: kappa,
            metrics: BTreeMap::new(),
            overrides: vec![format!("solver.kappa={kappa:e}")],
            error: None,
        };
        match res {
            Ok(traj) => {
                row.metrics = summary(traj);
                if i > 0 {
                    let diff = match &runs[i - 1] {
                        Ok(prev) => checkpoints
                            .iter()
                            .map(|&t| match (velocity_at(traj, t), velocity_at(prev, t)) {
                                (Some(a), Some(b)) => a.plus(-1.0, &b).l2_norm(&traj.domain),
                                _ => f64::NAN,
                            })
                            .fold(0.0, |a: f64, b| if b.is_nan() { b } else { a.max(b) }),
                        Err(_) => f64::NAN,
                    };
                    row.metrics.insert("velocity_difference".into(), diff);
                }
            }
            Err(e) => row.error = Some(e.clone()),
        }
        rows.push(row);
    }
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));

    let mut orders = Vec::new();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let d = *r.metrics.get("velocity_difference")?;
            (d > 0.0 && r.parameter > 0.0).then_some((r.parameter, d))
        })
        .collect();
    if pts.len() >= 2 {
        let (k, d): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        orders.push(FittedOrder {
            metric: "velocity_difference".into(),
            order: fit_order(&k, &d),
            points: pts.len(),
            note: "rate in kappa of neighbouring-run differences".into(),
        });
    }
    Ok(StudyResult {
        name: "kappa_sweep".into(),
        parameter: "kappa".into(),
        rows,
        orders,
    })
}

/// Largest relative L2 error of `eta` against the affine oracle over stored
/// samples, when the configuration belongs to the affine family.
pub fn oracle_error(cfg: &RunConfig, traj: &Trajectory) -> Option<f64> {
    let c = match cfg.profile {
        ProfileKind::Parabolic { c, modulation } if modulation == 0.0 => c,
        _ => return None,
    };
    let rate = match cfg.initial {
        InitialSpec::Zero => 0.0,
        InitialSpec::Expansion { rate } => rate,
        _ => return None,
    };
    if cfg.domain.dim != 1 || cfg.eos.gamma != 2.0 || cfg.mollify_radius != 0.0 {
        return None;
    }
    let t_end = traj.last().time;
    let dt_ref = (t_end / 20_000.0).max(1e-7);
    let o = affine_oracle_kappa(c, cfg.solver.kappa, 1.0, rate, t_end, dt_ref).ok()?;
    let d = &traj.domain;
    traj.samples
        .iter()
        .map(|s| {
            let exact = o.eta(d, s.time).ok()?;
            Some(s.eta.plus(-1.0, &exact).l2_norm(d) / exact.l2_norm(d))
        })
        .try_fold(0.0_f64, |m, e| e.map(|e| m.max(e)))
}

/// Runs `levels` grids, halving the spacing (and a fixed `dt`) each time,
/// and fits observed orders of the oracle error and identity residuals.
pub fn refinement_study(base: &RunConfig, levels: usize) -> Result<StudyResult, HarnessError> {
    if levels < 3 {
        return Err(HarnessError::Config(format!(
            "refinement needs at least 3 levels (got {levels})"
        )));
    }
    base.validate()?;
    let configs: Vec<RunConfig> = (0..levels)
        .map(|l| {
            let mut c = base.clone();
            let f = 1usize << l;
            if c.domain.dim > 1 {
                c.domain.n_horizontal *= f;
            }
            c.domain.n_vertical = (c.domain.n_vertical - 1) * f + 1;
            if c.solver.dt > 0.0 {
                c.solver.dt /= f as f64;
            }
            c.solver.snapshot_stride *= f;
            c
        })
        .collect();
    let runs: Vec<Result<Trajectory, String>> = configs
        .par_iter()
        .map(|c| simulate(c).map_err(|e| e.to_string()))
        .collect();

    let mut rows: Vec<StudyRow> = configs
        .iter()
        .zip(&runs)
        .map(|(c, res)| {
            let h = 1.0 / (c.domain.n_vertical - 1) as f64;
            let mut overrides = vec![format!("domain.n_vertical={}", c.domain.n_vertical)];
            if c.domain.dim > 1 {
                overrides.push(format!("domain.n_horizontal={}", c.domain.n_horizontal));
            }
            if c.solver.dt > 0.0 {
                overrides.push(format!("solver.dt={:e}", c.solver.dt));
            }
            overrides.push(format!("solver.snapshot_stride={}", c.solver.snapshot_stride));
            let mut row = StudyRow {
                parameter: h,
                metrics: BTreeMap::new(),
                overrides,
                error: None,
            };
            match res {
                Ok(traj) => {
                    row.metrics = summary(traj);
                    if let Some(e) = oracle_error(c, traj) {
                        row.metrics.insert("oracle_error".into(), e);
                    }
                }
                Err(e) => row.error = Some(e.clone()),
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));

    let mut orders = Vec::new();
    for metric in ["oracle_error", "max_piola_residual", "max_curl_residual"] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.metrics.get(metric).map(|v| (r.parameter, *v)))
            .collect();
        if pts.len() < 3 || pts.len() != rows.len() {
            continue;
        }
        let (h, e): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let at_roundoff = e.iter().all(|v| *v < 1e-11);
        orders.push(FittedOrder {
            metric: metric.into(),
            order: if at_roundoff { f64::INFINITY } else { fit_order(&h, &e) },
            points: pts.len(),
            note: if at_roundoff {
                "residual at roundoff on every level".into()
            } else {
                "least-squares slope of log error against log h".into()
            },
        });
    }
    Ok(StudyResult {
        name: "refinement".into(),
        parameter: "h".into(),
        rows,
        orders,
    })
}
