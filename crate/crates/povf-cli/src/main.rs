//! `povf`: operator surface for the PoVF consensus library.
//!
//! Exit codes: 0 success, 1 verification-false / failed self-test, 2 usage
//! or config error, 3 internal invariant violation.

mod report_cmd;
mod selftest;
mod sim_cmd;
mod vdf_cmd;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

pub(crate) const EXIT_OK: u8 = 0;
pub(crate) const EXIT_VERIFY_FALSE: u8 = 1;
pub(crate) const EXIT_USAGE: u8 = 2;
pub(crate) const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "povf",
    version,
    about = "PoVF consensus toolkit: self-tests, VDF benchmarks, deterministic network simulation, and trace reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in worked examples and print one pass/fail line each
    Selftest,
    /// Evaluate, verify, or benchmark the verifiable delay function
    Vdf {
        #[command(subcommand)]
        command: vdf_cmd::VdfCommand,
    },
    /// Run a network simulation described by a TOML or JSON config
    Sim(sim_cmd::SimArgs),
    /// Recompute metrics from a run directory or a plain counts file
    Report(report_cmd::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Selftest => selftest::run(),
        Command::Vdf { command } => vdf_cmd::run(command),
        Command::Sim(args) => sim_cmd::run(args),
        Command::Report(args) => report_cmd::run(args),
    };
    ExitCode::from(code)
}
