use std::path::Path;
use std::process::{Command, Output};

use tvmap::config::{ExperimentConfig, KeyValues};
use tvmap::io::Table;

fn tvmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvmap")).args(args).output().unwrap()
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.cfg");
    std::fs::write(
        &path,
        format!(
            "[experiment]\ntask = denoise\nseed = 3\nout_dir = {}\n\n[phantom]\nnx = 8\nny = 8\nnt = 2\n\n\
             [solver]\niters = 16\n\n[dataset]\ntrain = 2\nval = 1\ntest = 1\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bad_input_exits_with_code_2() {
    assert_eq!(tvmap(&["gen", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(
        tvmap(&["solve", "--task", "denoise", "--T", "4"]).status.code(),
        Some(2)
    );
    assert_eq!(
        tvmap(&["gridsearch", "--task", "denoise", "--mode", "diagonal"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn solve_writes_image_diagnostics_and_a_replayable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = tvmap(&["solve", "--config", &cfg, "--lambda", "0.1", "--lambda-t", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out");
    assert!(run.join("solve_000.tnsr").exists());
    let diag = Table::read(run.join("solve_000_diagnostics.csv")).unwrap();
    assert_eq!(diag.header, ["iter", "objective", "step_norm", "data_residual"]);
    assert_eq!(diag.rows.len(), 16);

    let manifest = KeyValues::read(run.join("solve.manifest")).unwrap();
    assert_eq!(manifest.get("run.lambda_t"), Some("0.05"));
    let replay = ExperimentConfig::from_kv(&manifest).unwrap();
    assert_eq!(replay, ExperimentConfig::read(&cfg).unwrap());
}

#[test]
fn gridsearch_reports_every_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = tvmap(&[
        "gridsearch",
        "--config",
        &cfg,
        "--mode",
        "xy_t",
        "--grid",
        "0.05,0.1",
        "--grid-t",
        "0.02,0.04,0.08",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Table::read(dir.path().join("out/gridsearch.csv")).unwrap();
    assert_eq!(t.rows.len(), 6);
    let m = KeyValues::read(dir.path().join("out/gridsearch.manifest")).unwrap();
    assert!(m.get("run.best_lambda_xy").is_some());
}

#[test]
fn certificates_pass_on_the_default_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    for kind in ["--rate", "--lipschitz"] {
        let out = tvmap(&["certify", "--task", "denoise", kind, "--out", out_dir]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let rate = Table::read(dir.path().join("certify_rate.csv")).unwrap();
    assert!(rate.column("holds").unwrap().iter().all(|h| *h == "true"));
}
