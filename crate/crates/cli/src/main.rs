mod args;
mod commands;
mod error;
mod output;
mod svg;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help/--version
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => commands::validate::run(a),
        Command::Baseline(a) => commands::baseline::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Trace(a) => commands::trace::run(a),
        Command::Correlate(a) => commands::correlate::run(a),
        Command::Human(a) => commands::human::run(a),
        Command::Report(a) => commands::report::run(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::ValidationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(1)
        }
    }
}
