use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracstrich_cli::{config_source, configure_threads, execute, resolved_toml, Command};

/// Numerical experiments for weighted Strichartz estimates of the radial
/// fractional Schrödinger equation.
#[derive(Parser)]
#[command(name = "fracstrich", version)]
struct Cli {
    subcommand: Command,
    /// TOML config; built-in defaults when absent. For `replay`, a manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "FRACSTRICH_THREADS")]
    threads: Option<usize>,
    /// Output directory, `fracstrich-out/<subcommand>` by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config as TOML and exit without running.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_config {
        return match config_source(cli.config.as_deref()).and_then(|src| resolved_toml(cli.subcommand, &src)) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("fracstrich {}: {e}", cli.subcommand.name());
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    configure_threads(cli.threads);
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from("fracstrich-out").join(cli.subcommand.name()));
    match execute(cli.subcommand, cli.config.as_deref(), &out, cli.threads) {
        Ok(status) => {
            let verdict = if status.passed { "pass" } else { "FAIL" };
            println!("{}: acceptance {verdict}, outputs in {}", cli.subcommand.name(), status.out.display());
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fracstrich {}: {e}", cli.subcommand.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
