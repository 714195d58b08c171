use std::process::ExitCode;

use clap::Parser;
use trajopt_cli::commands::Outcome;
use trajopt_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(Outcome::Failure.code())
        }
    }
}
