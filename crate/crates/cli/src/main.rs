use std::process::ExitCode;

use clap::Parser;
use qls_experiments::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qls: {e:#}");
            ExitCode::FAILURE
        }
    }
}
