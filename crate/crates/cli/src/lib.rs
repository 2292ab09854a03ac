//! Batch front end for the stability-certificate toolkit.
//!
//! A run is
//!
//! ```text
//! gaincert <command> --config run.json [--out DIR] [--seed N] [--quiet]
//! ```
//!
//! where the JSON document names functions, certificates, transforms, models,
//! and signals, sets the numeric knobs, and carries one task section per
//! command (see [`config`] for the grammar). Commands:
//!
//! ```text
//! simulate   integrate one trajectory          trajectory.csv + summary.json
//! verify     check a certificate               estimate.csv/draws.csv + report.json
//! compose    interconnect two certificates     certificate.json | failure.json
//! smallgain  check a small-gain condition      smallgain.json
//! equiv      rebuild a certificate             certificate.json (+ transforms)
//! falsify    search for a counterexample       counterexample.json + witness.csv
//! selftest   built-in acceptance suite         acceptance.json
//! ```
//!
//! Exit status: 0 on pass/success, 1 on a failed verdict (certificate
//! failure, small-gain failure, blow-up, or a falsification target that
//! held), 2 on configuration errors. Identical configuration and seed
//! produce byte-identical artifacts; documents emitted by `compose` and
//! `equiv` merge back into later runs through `include`.

pub mod acceptance;
pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::{ConfigDoc, ConfigError, Registry};

#[derive(Parser)]
#[command(
    name = "gaincert",
    version,
    about = "Stability-certificate toolkit: simulate, verify, compose, falsify"
)]
struct Cli {
    /// JSON run configuration (required by every command except selftest).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress lines; artifacts are still written.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate one trajectory of a named model.
    Simulate,
    /// Check a certificate on one trajectory or a seeded random batch.
    Verify,
    /// Combine two certificates across an interconnection.
    Compose,
    /// Check that a gain pair satisfies the small-gain condition.
    Smallgain,
    /// Rebuild a certificate as another property, possibly in new coordinates.
    Equiv,
    /// Search for a counterexample to a claimed linear-gain estimate.
    Falsify,
    /// Run the built-in acceptance suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Compose => "compose",
            Command::Smallgain => "smallgain",
            Command::Equiv => "equiv",
            Command::Falsify => "falsify",
            Command::Selftest => "selftest",
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit status.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("config error: {e}");
            2
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, ConfigError> {
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", cli.out.display())))?;

    if let Command::Selftest = cli.command {
        return commands::run_selftest(&cli.out, cli.quiet);
    }

    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError(format!("{} requires --config PATH", cli.command.name())))?;
    let mut doc = ConfigDoc::load(path)?;
    if let Some(seed) = cli.seed {
        doc.settings.seed = seed;
    }
    doc.check_settings()?;
    if let Some(declared) = &doc.command {
        if declared != cli.command.name() {
            return Err(ConfigError(format!(
                "config declares command {declared:?} but {:?} was invoked",
                cli.command.name()
            )));
        }
    }
    let reg = Registry::build(&doc)?;
    let ctx = Ctx { doc: &doc, reg: &reg, out: &cli.out, quiet: cli.quiet };
    match cli.command {
        Command::Simulate => commands::run_simulate(&ctx),
        Command::Verify => commands::run_verify(&ctx),
        Command::Compose => commands::run_compose(&ctx),
        Command::Smallgain => commands::run_smallgain(&ctx),
        Command::Equiv => commands::run_equiv(&ctx),
        Command::Falsify => commands::run_falsify(&ctx),
        Command::Selftest => unreachable!("handled above"),
    }
}
