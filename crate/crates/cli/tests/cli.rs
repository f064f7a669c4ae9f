use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracstrich(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracstrich"))
        .args(args)
        .current_dir(dir)
        .env_remove("FRACSTRICH_THREADS")
        .output()
        .expect("spawn fracstrich")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SUBCOMMANDS: [&str; 13] = [
    "bessel-check",
    "transform-check",
    "propagate",
    "mcnorm",
    "maximal-check",
    "vdc-scan",
    "kernel-scan",
    "tk-scan",
    "strichartz-scan",
    "morawetz",
    "extremize",
    "wellposed",
    "determinism",
];

#[test]
fn passing_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", "orders = [0.0, 1.0, 2.0]\n");
    let out = fracstrich(&["bessel-check", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("o");
    let manifest = json(&o.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "bessel-check");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["orders"], serde_json::json!([0.0, 1.0, 2.0]));
    assert_eq!(manifest["config"]["samples"], 64);
    let summary = json(&o.join("summary.json"));
    assert_eq!(summary["acceptance"]["pass"], true);
    assert_eq!(summary["acceptance"]["criteria"]["1"], true);
    let csv = std::fs::read_to_string(o.join("results.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn acceptance_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", "orders = [1.5]\n");
    let out = fracstrich(&["bessel-check", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("o/summary.json"))["acceptance"]["pass"], false);
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let malformed = write(d, "m.toml", "orders = [1.5, \n");
    let unknown = write(d, "u.toml", "orders = [2.0]\nradius = 3\n");
    let wrong_type = write(d, "w.toml", "orders = \"two\"\n");
    for cfg in [&malformed, &unknown, &wrong_type] {
        assert_eq!(fracstrich(&["vdc-scan", "--config", cfg, "--out", "o"], d).status.code(), Some(2), "{cfg}");
    }
    assert_eq!(fracstrich(&["vdc-scan", "--config", "missing.toml"], d).status.code(), Some(2));
    assert_eq!(fracstrich(&["replay"], d).status.code(), Some(2));
    assert_eq!(fracstrich(&["no-such-subcommand"], d).status.code(), Some(2));
    let few = write(d, "k.toml", "regime = \"diagonal\"\n[diagonal]\nj_max = 3\n");
    assert_eq!(fracstrich(&["kernel-scan", "--config", &few, "--out", "o"], d).status.code(), Some(2));
}

#[test]
fn oversized_grid_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", "t_max = 400.0\nrefinement = false\n");
    let out = fracstrich(&["wellposed", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn hypothesis_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", "orders = [1.0]\n");
    let out = fracstrich(&["vdc-scan", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("o/summary.json").exists());
}

#[test]
fn replay_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "t.toml", "dims = [3]\norders = [2.0]\nk_max = 7\n[trials]\ntrials = 4\n");
    let first = fracstrich(&["tk-scan", "--config", &cfg, "--out", "first"], d);
    assert!(first.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&first.stderr));
    let out = fracstrich(&["replay", "--config", "first/manifest.json", "--out", "again"], d);
    assert!(out.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(d.join("first/results.csv")).unwrap(),
        std::fs::read(d.join("again/results.csv")).unwrap()
    );
    assert_eq!(json(&d.join("again/summary.json"))["acceptance"]["criteria"]["12"], true);
    assert_eq!(json(&d.join("again/manifest.json"))["subcommand"], "tk-scan");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "p.toml", "orders = [2.0]\ndims = [3]\ntimes = [1.0]\n");
    let one = fracstrich(&["propagate", "--config", &cfg, "--threads", "1", "--out", "one"], d);
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    let env = Command::new(env!("CARGO_BIN_EXE_fracstrich"))
        .args(["propagate", "--config", &cfg, "--out", "four"])
        .current_dir(d)
        .env("FRACSTRICH_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(0), "{}", String::from_utf8_lossy(&env.stderr));
    assert_eq!(std::fs::read(d.join("one/results.csv")).unwrap(), std::fs::read(d.join("four/results.csv")).unwrap());
    assert_eq!(fracstrich(&["propagate", "--threads", "many"], d).status.code(), Some(2));
}

#[test]
fn printed_configs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for sub in SUBCOMMANDS {
        let first = fracstrich(&[sub, "--print-config"], d);
        assert_eq!(first.status.code(), Some(0), "{sub}");
        let cfg = write(d, "c.toml", &String::from_utf8(first.stdout.clone()).unwrap());
        let second = fracstrich(&[sub, "--config", &cfg, "--print-config"], d);
        assert_eq!(first.stdout, second.stdout, "{sub}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let sub = text.lines().find_map(|l| l.strip_prefix("# fracstrich ")).unwrap().split(' ').next().unwrap().to_string();
        let out = fracstrich(&[&sub, "--config", path.to_str().unwrap(), "--print-config"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
        n += 1;
    }
    assert_eq!(n, 12);
}
