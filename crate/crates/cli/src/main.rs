//! `setdp` command-line front end.
//!
//! Prints a JSON summary on success. On failure prints an error object to
//! stderr and exits with 2 (configuration), 3 (numeric) or 4 (I/O).

mod args;
mod commands;
mod failure;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use failure::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let f = Failure::config(e.to_string().trim_end());
            eprintln!("{}", f.to_json());
            return ExitCode::from(f.code() as u8);
        }
    };
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code() as u8)
        }
    }
}
