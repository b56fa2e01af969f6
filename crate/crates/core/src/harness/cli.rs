//! Command-line front end.

use super::config::RunConfig;
use super::io::{write_csv, format_float};
use super::oracle::affine_oracle_kappa;
use super::studies::{kappa_sweep, refinement_study, StudyResult};
use super::{run_case, HarnessError, EXIT_OK, EXIT_USAGE};
use crate::geometry::identity_suite;
use crate::hardy::{corpus_function, hardy_refinement, weighted_embedding_ratio};
use crate::parabolic::{decay_problem, manufactured_problem, solve_x};
use crate::vacuum::ProfileKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub const THREADS_ENV: &str = "PHYSVAC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "physvac", version, about = "Lagrangian gas dynamics with a physical vacuum boundary")]
pub struct Cli {
    /// Worker threads; overrides PHYSVAC_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set solver.kappa=0.01`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single simulation: energy CSV and snapshot dumps.
    Run(ConfigArgs),
    /// Runs the configuration for a decreasing list of kappa values.
    SweepKappa {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated kappas; overrides study.kappas.
        #[arg(long, value_delimiter = ',')]
        kappas: Option<Vec<f64>>,
    },
    /// Grid refinement study with fitted orders.
    Refine {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Cofactor, Piola and curl-curl identity suites.
    CheckIdentities {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Hardy and weighted embedding ratios on the test corpus.
    Hardy {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Corpus function; overrides study.hardy_function.
        #[arg(long)]
        function: Option<String>,
        /// Sobolev order; overrides study.hardy_order.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Standalone degenerate parabolic solve.
    Xsolve(ConfigArgs),
    /// Affine reference trajectory as CSV.
    Oracle {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
        #[arg(long, default_value_t = 0.0)]
        rdot0: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long, default_value_t = 0.2)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt_ref: f64,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, HarnessError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| HarnessError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn print_study(r: &StudyResult) {
    for row in &r.rows {
        let metrics: Vec<String> = row.metrics.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        match &row.error {
            None => println!("{}={:.6e} {}", r.parameter, row.parameter, metrics.join(" ")),
            Some(e) => println!("{}={:.6e} aborted: {e}", r.parameter, row.parameter),
        }
    }
    for o in &r.orders {
        println!("order {}: {:.3} over {} points ({})", o.metric, o.order, o.points, o.note);
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.load()?;
            let out = run_case(&cfg)?;
            let t = &out.trajectory;
            println!("steps {} t_final {}", t.steps, t.last().time);
            if let (Some(a), Some(b)) = (t.reports.first(), t.reports.last()) {
                println!(
                    "physical energy {} -> {} (relative change {:.3e})",
                    a.physical_energy,
                    b.physical_energy,
                    (b.physical_energy - a.physical_energy) / a.physical_energy
                );
            }
            println!("wrote {} files to {}", out.files.len(), cfg.output.dir.display());
        }
        Command::SweepKappa { cfg, kappas } => {
            let cfg = cfg.load()?;
            let kappas = kappas.unwrap_or_else(|| cfg.study.kappas.clone());
            let r = kappa_sweep(&cfg, &kappas)?;
            print_study(&r);
            std::fs::create_dir_all(&cfg.output.dir)?;
            r.write_csv(&cfg.output.dir.join("kappa_sweep.csv"))?;
        }
        Command::Refine { cfg, levels } => {
            let cfg = cfg.load()?;
            let r = refinement_study(&cfg, levels.unwrap_or(cfg.study.levels))?;
            print_study(&r);
            std::fs::create_dir_all(&cfg.output.dir)?;
            r.write_csv(&cfg.output.dir.join("refinement.csv"))?;
        }
        Command::CheckIdentities { dim, n, levels } => {
            let s = identity_suite(dim, n, levels)?;
            for l in &s.levels {
                println!(
                    "h={:.4e} cofactor={:.3e} piola_affine={:.3e} piola={:.3e} curlcurl={:.3e}",
                    l.h, l.cofactor_error, l.piola_affine, l.piola_smooth, l.curlcurl
                );
            }
            println!("piola order {:.3}, curl-curl order {:.3}", s.piola_order, s.curlcurl_order);
            if !s.passed() {
                return Err(HarnessError::Config("identity suite failed".into()));
            }
            println!("all identity suites passed");
        }
        Command::Hardy { cfg, function, order } => {
            let cfg = cfg.load()?;
            let name = function.unwrap_or(cfg.study.hardy_function.clone());
            let s = order.unwrap_or(cfg.study.hardy_order);
            let dim = cfg.domain.dim;
            let base = (cfg.domain.n_vertical - 1).max(8);
            let r = hardy_refinement(&name, s, dim, base, cfg.study.hardy_levels)?;
            println!(
                "hardy {name} s={s}: ratios {:?} spread {:.3e} constant {:.6e}",
                r.history,
                r.spread(),
                r.constant_estimate
            );
            let domain = cfg.build_domain()?;
            let u = corpus_function(&name, &domain)?;
            for p in [1, 2] {
                let e = weighted_embedding_ratio(&domain, &u, p)?;
                println!("embedding p={p}: ratio {:.6e} (left {:.6e}, right {:.6e})", e.ratio, e.left, e.right);
            }
        }
        Command::Xsolve(args) => {
            let cfg = args.load()?;
            let domain = cfg.build_domain()?;
            let profile = cfg.build_profile(&domain)?;
            let kappa = cfg.solver.kappa;
            let dt = if cfg.solver.dt > 0.0 { cfg.solver.dt } else { 1e-3 };
            let t_end = cfg.solver.t_end;
            let header;
            let rows: Vec<Vec<f64>> = match cfg.study.xsolve_case.as_str() {
                "manufactured" => {
                    let unit = matches!(cfg.profile, ProfileKind::Parabolic { c, modulation } if c == 1.0 && modulation == 0.0);
                    if cfg.eos.gamma != 2.0 || !unit {
                        return Err(HarnessError::Config(
                            "manufactured case needs gamma = 2 and the unit parabolic profile".into(),
                        ));
                    }
                    let (prob, exact) = manufactured_problem(&domain, &profile, kappa)?;
                    let sol = solve_x(&domain, &prob, dt, t_end)?;
                    header = "t,weighted_energy,gradient_norm,max_error";
                    sol.times
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| {
                            let ex = exact(t);
                            let err = sol.x[k].iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                            vec![t, sol.weighted_energy[k], sol.gradient_norm[k], err]
                        })
                        .collect()
                }
                "decay" => {
                    let v = domain.vertical_axis();
                    let mut x0 = domain.sample(|x| {
                        let m = if v > 0 { 0.5 * (2.0 * std::f64::consts::PI * x[0]).sin() } else { 0.0 };
                        x[v] * (1.0 - x[v]) * (1.0 + m)
                    });
                    for (i, _) in domain.boundary_nodes() {
                        x0[i] = 0.0;
                    }
                    let prob = decay_problem(&domain, &profile, kappa, x0)?;
                    let sol = solve_x(&domain, &prob, dt, t_end)?;
                    header = "t,weighted_energy,gradient_norm";
                    sol.times
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| vec![t, sol.weighted_energy[k], sol.gradient_norm[k]])
                        .collect()
                }
                other => {
                    return Err(HarnessError::Config(format!(
                        "study.xsolve_case must be `manufactured` or `decay`, got `{other}`"
                    )))
                }
            };
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join("xsolve.csv");
            write_csv(std::fs::File::create(&path)?, header, &rows)?;
            let last = rows.last().expect("initial row");
            println!("{header}");
            println!("{}", last.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(","));
        }
        Command::Oracle { c, r0, rdot0, kappa, t_end, dt_ref, out } => {
            let o = affine_oracle_kappa(c, kappa, r0, rdot0, t_end, dt_ref)?;
            let rows: Vec<Vec<f64>> = (0..o.times.len())
                .map(|k| vec![o.times[k], o.r[k], o.rdot[k], o.first_integral(k)])
                .collect();
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            write_csv(std::fs::File::create(&out)?, "t,r,rdot,first_integral", &rows)?;
            println!(
                "r({t_end}) = {} ; first-integral drift {:.3e} ; wrote {}",
                o.r.last().expect("initial value"),
                o.first_integral_drift(),
                out.display()
            );
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = thread_count(cli.threads).and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(HarnessError::Usage("--threads must be positive".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| execute(cli.command))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
