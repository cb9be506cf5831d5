use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    dari_cli::run(dari_cli::Cli::parse())
}
