//! `compeval` command-line tool.
//!
//! Reports go to stdout (or `--output`); diagnostics go to stderr.
//! Exit codes: 0 success, 2 invalid input or arguments, 3 insufficient data.

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();

    let outcome = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Plan(a) => commands::plan(a),
        Command::Collect(a) => commands::collect_cmd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Select(a) => commands::select(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
