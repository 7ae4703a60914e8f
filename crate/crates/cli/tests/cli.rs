use std::fs;
use std::process::Command;

fn chemdist() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chemdist"))
}

#[test]
fn generate_writes_both_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let status = chemdist()
        .args(["generate", "--model", "gilbert", "--window", "8", "--pad", "1", "--seed", "3", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let v = fs::read_to_string(dir.path().join("vertices.csv")).unwrap();
    let e = fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    assert!(v.starts_with("id,x1,x2,mark\n"));
    assert!(e.starts_with("id_a,id_b\n"));
}

#[test]
fn experiment_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "kind = degree-check\nreplicates = 3\nseed = 2\nout = {}\n\n[model]\nmodel = gilbert\nwindow = 10\npad = 2\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let run = || chemdist().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    let first = run();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run();
    assert!(String::from_utf8_lossy(&second.stderr).contains("0 replicate rows computed, 3 resumed"));
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "kind = longedge-scaling\nreplicates = 200\ngrid =\nout = o\n[model]\nmodel = boolean\ngamma = 0.5\nwindow = 8\n").unwrap();
    let out = chemdist().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
    let out = chemdist().args(["generate", "--model", "boolean", "--gamma", "2", "--window", "8", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn longedges_to_stdout_and_thread_cap() {
    let out = chemdist()
        .env("CHEMDIST_THREADS", "1")
        .args(["longedges", "--model", "boolean", "--gamma", "0.5", "--window", "8", "--pad", "0", "--m", "4", "--reps", "100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
    let bad = chemdist().env("CHEMDIST_THREADS", "zero").args(["longedges", "--model", "gilbert", "--window", "8", "--m", "4"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn mixing_and_renorm_subcommands() {
    let mix = chemdist()
        .args(["mixing", "--model", "gilbert", "--window", "6", "--intensity", "0.2", "--pad", "1", "--m", "6", "--x", "3,0", "--reps", "100"])
        .output()
        .unwrap();
    assert!(mix.status.success(), "{}", String::from_utf8_lossy(&mix.stderr));
    assert!(String::from_utf8_lossy(&mix.stdout).starts_with("event,m,x_norm"));
    let psi = chemdist()
        .args(["renorm", "--model", "gilbert", "--window", "204", "--intensity", "0.001", "--pad", "1", "--K", "102", "--stage", "1", "--reps", "100"])
        .output()
        .unwrap();
    assert!(psi.status.success(), "{}", String::from_utf8_lossy(&psi.stderr));
    assert_eq!(String::from_utf8_lossy(&psi.stdout).lines().count(), 3);
}
