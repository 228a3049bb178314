//! Command-line front end for the mlab toolkit: model documents, command
//! dispatch and report rendering.

pub mod commands;
pub mod model;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{run, Cli, CliError, Command, Outcome, EXIT_ARBITRAGE, EXIT_ERROR, EXIT_OK};
pub use model::{parse_model, parse_model_str, Model, ModelError};
pub use report::{Format, Report};

/// Parses arguments, runs the command and writes the report. Returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut impl std::io::Write, err: &mut impl std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_ERROR
                }
            };
        }
    };
    let format = cli.command.options().format;
    match run(&cli.command) {
        Ok(outcome) => {
            let _ = write!(out, "{}", outcome.report.render(format));
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "\nFor more information, try 'mlab {} --help'.", cli.command.name());
            }
            EXIT_ERROR
        }
    }
}
