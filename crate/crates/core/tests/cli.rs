use physvac::harness::cli::cli_main;
use physvac::harness::io::{read_csv, read_dump};
use physvac::harness::config::RunConfig;
use physvac::harness::{simulate, EXIT_ABORT, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use std::path::Path;

fn call(args: &[&str]) -> i32 {
    cli_main(std::iter::once("physvac").chain(args.iter().copied()))
}

fn run_into(dir: &Path, threads: &str) -> i32 {
    call(&[
        "--threads",
        threads,
        "run",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "domain.dim=2",
        "--set",
        "domain.n_horizontal=8",
        "--set",
        "domain.n_vertical=9",
        "--set",
        "solver.t_end=0.05",
        "--set",
        "solver.dt=0.01",
        "--set",
        "solver.snapshot_stride=1",
        "--set",
        "initial.kind=\"random\"",
        "--set",
        "initial.amplitude=0.05",
        "--set",
        "initial.modes=3",
        "--set",
        "seed=11",
    ])
}

#[test]
fn run_writes_energy_series_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_into(dir.path(), "1"), EXIT_OK);
    let (header, rows) = read_csv(&dir.path().join("energy.csv")).unwrap();
    assert_eq!(header[0], "t");
    assert!(rows.len() >= 3);
    let (meta, fields) = read_dump(&dir.path().join("snapshot_00000.bin")).unwrap();
    assert_eq!(meta.shape, vec![8, 9]);
    assert_eq!(meta.fields, vec!["eta_x", "eta_y", "v_x", "v_y"]);
    // eta starts at the identity
    assert_eq!(fields[1][3], 3.0 / 8.0);

    let cfg = RunConfig::load(Some(&dir.path().join("config.toml")), &[]).unwrap();
    let traj = simulate(&cfg).unwrap();
    let (meta, fields) = read_dump(&dir.path().join("snapshot_00002.bin")).unwrap();
    let s = &traj.samples[2];
    assert_eq!(meta.time, s.time);
    assert_eq!(fields, vec![s.eta.comps[0].clone(), s.eta.comps[1].clone(), s.v.comps[0].clone(), s.v.comps[1].clone()]);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_into(a.path(), "1"), EXIT_OK);
    assert_eq!(run_into(b.path(), "3"), EXIT_OK);
    for f in ["energy.csv", "snapshot_00003.bin"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["no-such-command"]), EXIT_USAGE);
    assert_eq!(call(&["run", "--bogus-flag"]), EXIT_USAGE);
    assert_eq!(call(&["--help"]), EXIT_OK);
    assert_eq!(call(&["run", "--set", "eos.gamma=1.0"]), EXIT_VALIDATION);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        call(&["run", "--out", out, "--set", "profile.kind=\"custom\"", "--set", "profile.rho0=[1.0,1.0,1.0,1.0]", "--set", "domain.n_vertical=4"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        call(&["run", "--out", out, "--set", "solver.max_steps=2", "--set", "solver.t_end=1.0"]),
        EXIT_ABORT
    );
    assert!(dir.path().join("energy.csv").exists());
}

#[test]
fn studies_and_tools() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(call(&["check-identities", "--dim", "2", "--n", "8"]), EXIT_OK);
    let oracle = dir.path().join("o.csv");
    assert_eq!(call(&["oracle", "--c", "1", "--t-end", "0.2", "--out", oracle.to_str().unwrap()]), EXIT_OK);
    let (_, rows) = read_csv(&oracle).unwrap();
    assert!((rows.last().unwrap()[0] - 0.2).abs() < 1e-12);
    assert_eq!(call(&["oracle", "--c", "0"]), EXIT_VALIDATION);
    let small = ["--set", "domain.n_vertical=17", "--set", "solver.t_end=0.02", "--set", "solver.dt=0.005"];
    let mut args = vec!["sweep-kappa", "--out", out, "--kappas", "1e-2,5e-3,2.5e-3"];
    args.extend(small);
    assert_eq!(call(&args), EXIT_OK);
    assert!(dir.path().join("kappa_sweep.csv").exists());
    let mut args = vec!["sweep-kappa", "--out", out, "--kappas", "1e-2"];
    args.extend(small);
    assert_eq!(call(&args), EXIT_VALIDATION);
    let mut args = vec!["refine", "--out", out, "--levels", "3"];
    args.extend(small);
    assert_eq!(call(&args), EXIT_OK);
    assert_eq!(call(&["hardy", "--function", "parabola", "--order", "2", "--set", "domain.n_vertical=33"]), EXIT_OK);
    assert_eq!(call(&["hardy", "--function", "nope"]), EXIT_VALIDATION);
    assert_eq!(
        call(&["xsolve", "--out", out, "--set", "solver.kappa=0.1", "--set", "solver.dt=0.01", "--set", "solver.t_end=0.1"]),
        EXIT_OK
    );
    assert_eq!(
        call(&["xsolve", "--out", out, "--set", "solver.kappa=0.1", "--set", "study.xsolve_case=\"decay\"", "--set", "domain.dim=2", "--set", "domain.n_horizontal=8"]),
        EXIT_OK
    );
    assert_eq!(call(&["xsolve", "--out", out]), EXIT_VALIDATION);
}
