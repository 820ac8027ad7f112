//! `choreo` — runs failure-detector QoS benchmarks and choreography scenarios
//! from JSON configuration files.

mod benchmark;
mod config;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Threshold sweep of the three detectors; writes one CSV per detector.
    Benchmark,
    /// Controller/engine simulation; writes the event log and final state.
    Scenario,
}

#[derive(Debug, Parser)]
#[command(name = "choreo", version, about)]
struct Args {
    #[arg(long, value_enum)]
    mode: Mode,
    /// JSON sweep spec (benchmark) or scenario document (scenario).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit non-zero when a scenario assertion fails (default).
    #[arg(long = "assert", action = ArgAction::SetTrue, overrides_with = "no_assert")]
    assert: bool,
    /// Report failed assertions but exit 0.
    #[arg(long = "no-assert", action = ArgAction::SetTrue, overrides_with = "assert")]
    no_assert: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = match args.mode {
        Mode::Benchmark => benchmark::run(&args.config, &args.out, args.seed),
        Mode::Scenario => scenario::run(&args.config, &args.out, args.seed, !args.no_assert),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
