use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use steadylab::{parse_config, run_command, Command};

/// Build, evolve and certify forced steady Navier-Stokes states.
///
/// Prints one JSON summary to stdout. Exit status is 0 when every check
/// passes, 1 when a check fails and 2 on configuration or runtime errors.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// build-steady, decay, stability, verify-bounds or sweep
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Concurrent sweep points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Checkpoint for verify-bounds; overrides verify.checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn fail(msg: String) -> ExitCode {
    println!("{}", json!({ "passed": false, "error": msg }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", cli.config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", cli.config.display())),
    };
    if cli.checkpoint.is_some() {
        cfg.verify_checkpoint = cli.checkpoint;
    }
    if cli.command == Command::Sweep && cfg.sweep.is_none() {
        return fail("sweep needs sweep.command and sweep.values".into());
    }
    let manifest = match run_command(cli.command, &cfg, &cli.out, cli.workers) {
        Ok(m) => m,
        Err(e) => return fail(e.to_string()),
    };
    let failed: Vec<&str> = manifest.failed_checks().map(|c| c.name.as_str()).collect();
    println!(
        "{}",
        json!({
            "command": manifest.command,
            "passed": manifest.passed,
            "error": manifest.error,
            "failed_checks": failed,
            "checks": manifest.checks.len(),
            "warnings": manifest.warnings,
            "artifacts": manifest.artifacts.len(),
            "digest": manifest.digest,
            "manifest": cli.out.join(steadylab::output::MANIFEST_FILE),
        })
    );
    match (&manifest.error, manifest.passed) {
        (Some(_), _) => ExitCode::from(2),
        (None, true) => ExitCode::SUCCESS,
        (None, false) => ExitCode::from(1),
    }
}
