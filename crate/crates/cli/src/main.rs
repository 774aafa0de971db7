//! `nisio`: batch runs of the envelope semigroup, its oracles and the Monte
//! Carlo dual.
//!
//! Exit codes: 0 when every check passes, 1 on configuration errors, 2 when a
//! tolerance is violated (outputs are still written).

mod config;
mod manifest;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;
use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nisio_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        use nisio_core::Error as E;
        match self {
            CliError::Core(
                E::Monotonicity { .. } | E::ImaginaryResidue { .. } | E::NonFinite(_),
            ) => run::EXIT_TOLERANCE,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nisio",
    version,
    about = "Sublinear Levy semigroups on the torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Dyadic envelope iteration: value, convergence and argmax CSVs.
    Evolve,
    /// Compare the envelope limit with an RK4 integration of the sup-generator equation.
    Oracle,
    /// Per-level increments, generator-limit table and dynamic-programming defects.
    Convergence,
    /// Monte Carlo lower bounds from extracted and random feedback strategies.
    Mc,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Oracle => "oracle",
            Command::Convergence => "convergence",
            Command::Mc => "mc",
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;

    let mut m = RunManifest::new(cli.command.name(), &cfg);
    let clock = Instant::now();
    let outcome = match cli.command {
        Command::Evolve => run::evolve(&cfg, &out, &mut m),
        Command::Oracle => run::oracle(&cfg, &out, &mut m),
        Command::Convergence => run::convergence(&cfg, &out, &mut m),
        Command::Mc => run::mc(&cfg, &out, &mut m),
    };
    m.time("total", clock.elapsed().as_secs_f64() * 1e3);
    let code = match &outcome {
        Ok(()) if m.failed().is_empty() => 0,
        Ok(()) => run::EXIT_TOLERANCE,
        Err(e) => {
            m.diag("error", e.to_string());
            e.exit_code()
        }
    };
    m.exit_code = code;
    m.write(&out)?;
    if !cli.quiet {
        for c in &m.checks {
            println!(
                "{} {}: {:e} (tolerance {:e})",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
        }
        println!("outputs in {}", out.display());
    }
    for c in m.failed() {
        eprintln!(
            "tolerance violated: {} = {:e} > {:e}",
            c.name, c.measured, c.tolerance
        );
    }
    outcome?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NISIO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        nisio_core::exec::configure_threads(n);
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("nisio: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
