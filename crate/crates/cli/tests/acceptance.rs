//! Runs every acceptance criterion through the binary, one invocation each,
//! and prints a PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Criterion {
    id: u8,
    subcommand: &'static str,
    config: &'static str,
    /// Wall-clock limit for the run; `None` when the limit is one of the checks.
    limit_seconds: Option<f64>,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, subcommand: "bessel-check", config: "c01-bessel.toml", limit_seconds: Some(10.0) },
    Criterion { id: 2, subcommand: "vdc-scan", config: "c02-vdc.toml", limit_seconds: Some(120.0) },
    Criterion { id: 3, subcommand: "kernel-scan", config: "c03-kernel-diagonal.toml", limit_seconds: Some(300.0) },
    Criterion { id: 4, subcommand: "kernel-scan", config: "c04-kernel-offdiagonal.toml", limit_seconds: Some(600.0) },
    Criterion { id: 5, subcommand: "tk-scan", config: "c05-tk.toml", limit_seconds: Some(300.0) },
    Criterion { id: 6, subcommand: "propagate", config: "c06-propagate.toml", limit_seconds: Some(60.0) },
    Criterion { id: 7, subcommand: "mcnorm", config: "c07-mcnorm.toml", limit_seconds: Some(120.0) },
    Criterion { id: 8, subcommand: "maximal-check", config: "c08-maximal.toml", limit_seconds: Some(300.0) },
    Criterion { id: 9, subcommand: "strichartz-scan", config: "c09-strichartz.toml", limit_seconds: Some(900.0) },
    Criterion { id: 10, subcommand: "morawetz", config: "c10-morawetz.toml", limit_seconds: Some(300.0) },
    Criterion { id: 11, subcommand: "wellposed", config: "c11-wellposed.toml", limit_seconds: Some(300.0) },
    // The replay overhead bound is checked inside the subcommand.
    Criterion { id: 12, subcommand: "determinism", config: "c12-determinism.toml", limit_seconds: None },
];

/// Criteria that fail as implemented. The Hankel series of J_{3/2} ends
/// after the 1/r term, so its two-term remainder is identically zero and has
/// no slope to fit.
const KNOWN_FAILURES: [u8; 1] = [1];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn run(c: &Criterion, root: &Path) -> Verdict {
    let out = root.join(format!("c{:02}", c.id));
    let status = Command::new(env!("CARGO_BIN_EXE_fracstrich"))
        .arg(c.subcommand)
        .arg("--config")
        .arg(configs().join(c.config))
        .arg("--out")
        .arg(&out)
        .output()
        .expect("spawn fracstrich");
    let code = status.status.code();
    let summary: Value = match std::fs::read_to_string(out.join("summary.json")) {
        Ok(text) => serde_json::from_str(&text).expect("summary.json parses"),
        Err(_) => {
            return Verdict {
                pass: false,
                detail: format!("exit {code:?}, no summary: {}", String::from_utf8_lossy(&status.stderr).trim()),
            }
        }
    };
    let acc = &summary["acceptance"];
    let key = c.id.to_string();
    let checked = acc["criteria"][&key].as_bool();
    let elapsed = summary["elapsed_seconds"].as_f64().unwrap_or(f64::NAN);
    let in_time = c.limit_seconds.is_none_or(|l| elapsed < l);
    let failed: Vec<String> = acc["checks"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|ch| ch["criterion"].as_u64() == Some(c.id as u64) && ch["pass"] != Value::Bool(true))
        .map(|ch| format!("{} = {} ({})", ch["name"].as_str().unwrap_or("?"), ch["value"], ch["bound"].as_str().unwrap_or("?")))
        .collect();
    let limit = c.limit_seconds.map_or("-".to_string(), |l| format!("{l}"));
    let mut detail = format!("{} in {elapsed:.1}s (limit {limit}s), exit {code:?}", c.subcommand);
    if checked.is_none() {
        detail.push_str(", no checks reported");
    }
    if !in_time {
        detail.push_str(", over time");
    }
    if !failed.is_empty() {
        detail.push_str("; failing: ");
        detail.push_str(&failed.join("; "));
    }
    Verdict {
        pass: checked == Some(true) && in_time,
        detail,
    }
}

// Runs without the libtest harness so the criterion lines always print.
fn main() {
    let root = tempfile::tempdir().unwrap();
    let mut surprises = Vec::new();
    for c in &CRITERIA {
        let v = run(c, root.path());
        println!("criterion {}: {} {}", c.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        let expected = !KNOWN_FAILURES.contains(&c.id);
        if v.pass != expected {
            surprises.push(format!("criterion {} {}", c.id, if v.pass { "passed unexpectedly" } else { "failed" }));
        }
    }
    if surprises.is_empty() {
        println!("acceptance: outcomes match expectations (known failures: {KNOWN_FAILURES:?})");
    } else {
        eprintln!("acceptance: {}", surprises.join(", "));
        std::process::exit(1);
    }
}
