//! Command-line front end for `stabkit`: reads system files, runs one
//! analysis and writes a JSON report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod file;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

pub use commands::Cli;
pub use file::{InputError, SystemFile};
pub use report::Report;

/// Exit code for bad input (files, flags, schema).
pub const EXIT_INPUT: u8 = 2;
/// Exit code for analyses that could not complete.
pub const EXIT_ANALYSIS: u8 = 3;

/// Parses `argv`, runs the command and writes the report. Returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let args = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(&cli, args).and_then(|r| write_report(&cli, &r)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<InputError>().is_some() {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_INPUT)
            } else {
                eprintln!("analysis failed: {e:#}");
                ExitCode::from(EXIT_ANALYSIS)
            }
        }
    }
}

fn write_report(cli: &Cli, report: &Report) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| file::input_error(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
