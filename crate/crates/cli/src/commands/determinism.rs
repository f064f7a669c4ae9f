use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{row, run_experiment, write_run, Check, Command, ConfigSource, Context, Experiment, Manifest, Outcome, Result, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterminismConfig {
    /// Each runs on its small built-in config, then again from the manifest.
    pub subcommands: Vec<Command>,
}

impl Default for DeterminismConfig {
    fn default() -> Self {
        Self {
            subcommands: Command::EXPERIMENTS.to_vec(),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Experiment for DeterminismConfig {
    fn smoke() -> Self {
        Self {
            subcommands: vec![Command::BesselCheck, Command::TkScan],
        }
    }

    fn run(&self, ctx: &Context) -> Result<Outcome> {
        let mut table = Table::new(&["subcommand", "bytes", "sha256", "sha256_replay", "identical"]);
        let mut replay_seconds = 0.0;
        let mut all = true;
        for &cmd in &self.subcommands {
            if matches!(cmd, Command::Determinism | Command::Replay) {
                return Err(crate::CliError::Schema(format!("{} cannot be nested", cmd.name())));
            }
            let first_dir = ctx.out.join("first").join(cmd.name());
            let replay_dir = ctx.out.join("replay").join(cmd.name());
            let sub = |dir: &std::path::Path| Context {
                out: dir.to_path_buf(),
                threads: ctx.threads,
            };
            let clock = Instant::now();
            let run = run_experiment(cmd, &ConfigSource::Smoke, &sub(&first_dir))?;
            write_run(&run, &first_dir, clock.elapsed().as_secs_f64())?;

            let clock = Instant::now();
            let manifest = Manifest::read(&first_dir.join("manifest.json"))?;
            let again = run_experiment(manifest.subcommand, &ConfigSource::Json(manifest.config), &sub(&replay_dir))?;
            write_run(&again, &replay_dir, clock.elapsed().as_secs_f64())?;
            replay_seconds += clock.elapsed().as_secs_f64();

            let a = std::fs::read(first_dir.join("results.csv"))?;
            let b = std::fs::read(replay_dir.join("results.csv"))?;
            let same = a == b;
            all &= same;
            table.push(row![cmd.name(), a.len(), hex(&a), hex(&b), same]);
        }
        let mut out = Outcome::new(table);
        out.set("replay_seconds", replay_seconds);
        out.set("identical", all);
        out.checks = vec![
            Check::new(Some(12), "results.csv identical after replay from manifest", if all { 0.0 } else { 1.0 }, "identical", all),
            // Timing lives in summary.json only; results.csv stays byte-stable.
            Check::below(Some(12), "replay overhead in seconds", replay_seconds, 60.0),
        ];
        Ok(out)
    }
}
