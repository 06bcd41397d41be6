//! `nonmarkov`: batch runs of the master-equation library from JSON
//! scenario files.
//!
//! Exit status 0 on success, 2 when the scenario is invalid (the message
//! names the key), 3 on a numerical failure (details in
//! `<out>/diagnostic.json`).

mod commands;
mod config;
mod output;
mod scan;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Failure;
use config::{Config, SchemaError};

#[derive(Parser, Debug)]
#[command(name = "nonmarkov", version, about = "Time-local master equations for quadratic fermions with wide-band leads")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true, env = "NONMARKOV_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long, global = true, env = "NONMARKOV_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for scans (default: all cores).
    #[arg(long, global = true, env = "NONMARKOV_THREADS")]
    threads: Option<usize>,

    /// Overrides the integrator's relative tolerance and the steady-state
    /// residual bound.
    #[arg(long, global = true, env = "NONMARKOV_TOL", allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate χ(t) and record the rates of N(t) along the way.
    Evolve,
    /// Rates, jump-mode labels and N(t) on the time grid, without evolving χ.
    Rates,
    /// Steady state χ_∞, its noise matrix, currents and correlation decay.
    Steady,
    /// Steady-state observables over a one- or two-parameter grid.
    Scan,
    /// Compare the master equation with an exactly evolved finite bath.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Rates => "rates",
            Command::Steady => "steady",
            Command::Scan => "scan",
            Command::Oracle => "oracle",
        }
    }
}

fn load(cli: &Cli) -> Result<Config, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| SchemaError::new("config", "no scenario given (use --config or NONMARKOV_CONFIG)"))?;
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::new("config", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = config::parse(&text, base)?;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(SchemaError::new("tol", format!("must be a positive number, got {tol}")).into());
        }
        cfg.tolerances.ode_rel = tol;
        cfg.tolerances.steady = tol;
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &Config) -> PathBuf {
    cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli, cfg: &Config, out: &Path) -> Result<(), Failure> {
    let outputs = match cli.command {
        Command::Evolve => commands::evolve(cfg, out)?,
        Command::Rates => commands::rates(cfg, out)?,
        Command::Steady => commands::steady(cfg, out)?,
        Command::Scan => scan::scan(cfg, out)?,
        Command::Oracle => commands::oracle(cfg, out)?,
    };
    commands::finish(cli.command.name(), cfg, out, outputs)
}

fn diagnose(command: &str, cfg: &Config, out: &Path, context: &str, error: &nonmarkov::Error) {
    let doc = json!({
        "command": command,
        "config_sha256": output::config_hash(cfg),
        "context": context,
        "error": error.to_string(),
        "detail": format!("{error:?}"),
    });
    let path = out.join("diagnostic.json");
    let text = serde_json::to_string_pretty(&doc).expect("diagnostic serializes") + "\n";
    if let Err(e) = std::fs::write(&path, text) {
        eprintln!("could not write {}: {e}", path.display());
    } else {
        eprintln!("diagnostic written to {}", path.display());
    }
    let mut m = output::Manifest::new(command, cfg, "failed");
    m.outputs = vec!["diagnostic.json".into()];
    let _ = m.write(out);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: invalid config at `threads`: must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let out = output_dir(&cli, &cfg);
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: {}: {e}", out.display());
        return ExitCode::from(1);
    }
    match run(&cli, &cfg, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Schema(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { context, error }) => {
            eprintln!("error: numerical failure while {context}: {error}");
            diagnose(cli.command.name(), &cfg, &out, &context, &error);
            ExitCode::from(3)
        }
        Err(e @ Failure::Io(..)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
