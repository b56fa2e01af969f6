//! Configuration, persistence, reference solutions, studies and the CLI.

pub mod cli;
pub mod config;
pub mod io;
pub mod oracle;
pub mod studies;

use crate::diagnostics::DiagnosticsError;
use crate::grid::GridError;
use crate::hardy::HardyError;
use crate::kappa::{run, RunAbort, SolverError, Trajectory};
use crate::parabolic::XError;
use crate::vacuum::VacuumError;
use config::RunConfig;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Vacuum(#[from] VacuumError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Abort(#[from] RunAbort),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Parabolic(#[from] XError),
    #[error(transparent)]
    Hardy(#[from] HardyError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Abort(_) => EXIT_ABORT,
            HarnessError::Usage(_) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub files: Vec<PathBuf>,
}

/// Builds and runs a configuration without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<Trajectory, HarnessError> {
    cfg.validate()?;
    let (domain, profile, u0) = cfg.build()?;
    Ok(run(&domain, u0, &profile, &cfg.solver_config())?)
}

fn write_outputs(cfg: &RunConfig, traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml())?;
    files.push(cfg_path);
    if cfg.output.energy_csv {
        let p = dir.join("energy.csv");
        io::write_energy_csv(&p, &traj.reports)?;
        files.push(p);
    }
    if cfg.output.dumps {
        for (k, s) in traj.samples.iter().enumerate().step_by(cfg.output.dump_stride) {
            let p = dir.join(format!("snapshot_{k:05}.bin"));
            io::write_state_dump(&p, &traj.domain, s, k)?;
            files.push(p);
        }
    }
    Ok(files)
}

/// Runs a configuration and writes the energy series and dumps under
/// `cfg.output.dir`. An aborted run still writes what it produced.
pub fn run_case(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    match simulate(cfg) {
        Ok(trajectory) => {
            let files = write_outputs(cfg, &trajectory, &cfg.output.dir)?;
            Ok(RunOutcome { trajectory, files })
        }
        Err(HarnessError::Abort(abort)) => {
            write_outputs(cfg, &abort.partial, &cfg.output.dir)?;
            Err(HarnessError::Abort(abort))
        }
        Err(e) => Err(e),
    }
}
