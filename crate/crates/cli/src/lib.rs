//! Experiment harness: one subcommand per numerical experiment, a TOML
//! config in, `manifest.json`, `results.csv` and `summary.json` out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

mod commands;
pub mod report;

pub use commands::*;
pub use report::{Cell, Check, Outcome, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Config does not parse or fails validation.
    #[error("config: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] fracstrich::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fracstrich::Error as E;
        match self {
            CliError::Schema(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Io(_) => 2,
                E::Resolution(_) | E::TimeResolution(_) | E::Budget(_) => 3,
                E::Hypothesis(_) | E::NotContractive(_) | E::SingularSampling(_) | E::DivisionGuard(_) => 4,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BesselCheck,
    TransformCheck,
    Propagate,
    Mcnorm,
    MaximalCheck,
    VdcScan,
    KernelScan,
    TkScan,
    StrichartzScan,
    Morawetz,
    Extremize,
    Wellposed,
    /// Runs every experiment on a small config and replays it from its manifest.
    Determinism,
    /// Reruns a manifest (given as the config) and compares results.csv.
    Replay,
}

impl Command {
    /// The twelve experiment subcommands.
    pub const EXPERIMENTS: [Command; 12] = [
        Command::BesselCheck,
        Command::TransformCheck,
        Command::Propagate,
        Command::Mcnorm,
        Command::MaximalCheck,
        Command::VdcScan,
        Command::KernelScan,
        Command::TkScan,
        Command::StrichartzScan,
        Command::Morawetz,
        Command::Extremize,
        Command::Wellposed,
    ];

    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Where a config comes from.
#[derive(Debug, Clone)]
pub enum ConfigSource {
    Default,
    /// A small config that exercises the code paths in seconds.
    Smoke,
    Toml(String),
    /// A resolved config as echoed in a manifest.
    Json(Value),
}

impl ConfigSource {
    fn load<C: Experiment>(&self) -> Result<C> {
        match self {
            ConfigSource::Default => Ok(C::default()),
            ConfigSource::Smoke => Ok(C::smoke()),
            ConfigSource::Toml(text) => toml::from_str(text).map_err(|e| CliError::Schema(e.to_string())),
            ConfigSource::Json(v) => serde_json::from_value(v.clone()).map_err(|e| CliError::Schema(e.to_string())),
        }
    }
}

pub struct Context {
    pub out: PathBuf,
    pub threads: Option<usize>,
}

pub trait Experiment: Serialize + DeserializeOwned + Default {
    fn smoke() -> Self;
    fn run(&self, ctx: &Context) -> Result<Outcome>;
}

/// A finished experiment, not yet written.
pub struct Run {
    pub command: Command,
    pub config: Value,
    pub outcome: Outcome,
}

fn typed<C: Experiment>(command: Command, src: &ConfigSource, ctx: &Context) -> Result<Run> {
    let cfg: C = src.load()?;
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::Schema(e.to_string()))?;
    let outcome = cfg.run(ctx)?;
    Ok(Run { command, config, outcome })
}

macro_rules! dispatch {
    ($command:expr, $f:ident($($arg:expr),*)) => {{
        use commands::*;
        match $command {
            Command::BesselCheck => $f::<BesselConfig>($($arg),*),
            Command::TransformCheck => $f::<TransformConfig>($($arg),*),
            Command::Propagate => $f::<PropagateConfig>($($arg),*),
            Command::Mcnorm => $f::<McnormConfig>($($arg),*),
            Command::MaximalCheck => $f::<MaximalConfig>($($arg),*),
            Command::VdcScan => $f::<VdcConfig>($($arg),*),
            Command::KernelScan => $f::<KernelConfig>($($arg),*),
            Command::TkScan => $f::<TkConfig>($($arg),*),
            Command::StrichartzScan => $f::<StrichartzConfig>($($arg),*),
            Command::Morawetz => $f::<MorawetzConfig>($($arg),*),
            Command::Extremize => $f::<ExtremizeConfig>($($arg),*),
            Command::Wellposed => $f::<WellposedConfig>($($arg),*),
            Command::Determinism => $f::<DeterminismConfig>($($arg),*),
            Command::Replay => Err(CliError::Schema("replay takes a manifest, see `replay`".into())),
        }
    }};
}

pub fn run_experiment(command: Command, src: &ConfigSource, ctx: &Context) -> Result<Run> {
    dispatch!(command, typed(command, src, ctx))
}

fn to_toml<C: Experiment>(src: &ConfigSource) -> Result<String> {
    let cfg: C = src.load()?;
    toml::to_string_pretty(&cfg).map_err(|e| CliError::Schema(e.to_string()))
}

/// The resolved config as TOML, ready to edit and pass back with `--config`.
pub fn resolved_toml(command: Command, src: &ConfigSource) -> Result<String> {
    dispatch!(command, to_toml(src))
}

/// Reads a TOML config, or the built-in defaults when there is none.
pub fn config_source(path: Option<&Path>) -> Result<ConfigSource> {
    Ok(match path {
        None => ConfigSource::Default,
        Some(p) => ConfigSource::Toml(std::fs::read_to_string(p).map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: Command,
    pub config: Value,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }
}

/// Outcome of a written run.
#[derive(Debug, Clone, PartialEq)]
pub struct Status {
    pub passed: bool,
    pub out: PathBuf,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Writes manifest.json, results.csv and summary.json into `out`.
pub fn write_run(run: &Run, out: &Path, elapsed: f64) -> Result<Status> {
    std::fs::create_dir_all(out)?;
    let manifest = Manifest {
        tool: "fracstrich".into(),
        version: VERSION.into(),
        subcommand: run.command,
        config: run.config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Schema(e.to_string()))?;
    std::fs::write(out.join("manifest.json"), text + "\n")?;
    std::fs::write(out.join("results.csv"), run.outcome.table.to_csv()?)?;
    let passed = run.outcome.passed();
    let summary = json!({
        "subcommand": run.command,
        "version": VERSION,
        "elapsed_seconds": elapsed,
        "summary": run.outcome.summary,
        "acceptance": run.outcome.acceptance(),
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Schema(e.to_string()))?;
    std::fs::write(out.join("summary.json"), text + "\n")?;
    Ok(Status {
        passed,
        out: out.to_path_buf(),
    })
}

/// Runs and writes one subcommand. `replay` reads the manifest at the
/// config path, reruns it into `out` and compares results.csv with the
/// copy next to the manifest.
pub fn execute(command: Command, config: Option<&Path>, out: &Path, threads: Option<usize>) -> Result<Status> {
    let ctx = Context {
        out: out.to_path_buf(),
        threads,
    };
    let clock = Instant::now();
    if command == Command::Replay {
        let path = config.ok_or_else(|| CliError::Schema("replay needs --config <manifest.json>".into()))?;
        let manifest = Manifest::read(path)?;
        let mut run = run_experiment(manifest.subcommand, &ConfigSource::Json(manifest.config), &ctx)?;
        let fresh = run.outcome.table.to_csv()?;
        let original = path.with_file_name("results.csv");
        if original.exists() {
            let old = std::fs::read(&original)?;
            run.outcome.checks.push(
                Check::new(
                    Some(12),
                    "results.csv reproduced byte for byte",
                    if old == fresh { 0.0 } else { 1.0 },
                    "identical",
                    old == fresh,
                )
                .note(original.display().to_string()),
            );
        }
        return write_run(&run, out, clock.elapsed().as_secs_f64());
    }
    let src = config_source(config)?;
    let run = run_experiment(command, &src, &ctx)?;
    write_run(&run, out, clock.elapsed().as_secs_f64())
}

/// Caps the rayon worker count. Later calls are ignored.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
