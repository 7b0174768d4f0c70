//! `stabenc` command-line front end.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{Cli, RunConfig};

/// Exit status for malformed or inconsistent inputs.
const EXIT_INPUT: u8 = 2;
/// Exit status for failures of the numerical pipeline.
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<stabenc::Error>() {
            return if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            };
        }
    }
    // file-system and JSON errors raised by the CLI itself
    EXIT_INPUT
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::resolve(cli).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
