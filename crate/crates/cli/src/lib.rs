//! Command-line front end for `binocov`.
//!
//! [`run`] is the whole program minus process I/O: it takes argv and the
//! snap-tolerance environment value and returns the exit code and the text
//! destined for stdout and stderr.

pub mod args;
pub mod commands;
pub mod output;
pub mod verify;

use std::ffi::OsString;

use binocov::SnapTolerance;
use clap::error::ErrorKind;

use args::{Cli, Command};

pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const PRECONDITION: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const IO: i32 = 74;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Self {
            code: exit::OK,
            stdout,
            stderr: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }
}

impl From<CliError> for Outcome {
    fn from(e: CliError) -> Self {
        Outcome {
            code: e.code,
            stdout: String::new(),
            stderr: format!("error: {}\n", e.message),
        }
    }
}

/// Interprets the `BINOCOV_EPS_INT` value, if any.
pub fn parse_env_eps(value: Option<OsString>) -> Result<SnapTolerance, CliError> {
    match value {
        None => Ok(SnapTolerance::default()),
        Some(v) => {
            let text = v.into_string().map_err(|_| {
                CliError::usage(format!("{} is not valid UTF-8", SnapTolerance::ENV_VAR))
            })?;
            SnapTolerance::parse(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", SnapTolerance::ENV_VAR)))
        }
    }
}

pub fn run<I, T>(argv: I, env_eps: Option<OsString>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome::ok(text),
                _ => Outcome {
                    code: exit::USAGE,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let snap = match parse_env_eps(env_eps) {
        Ok(s) => s,
        Err(e) => return e.into(),
    };
    dispatch(&cli, snap).unwrap_or_else(Outcome::from)
}

fn dispatch(cli: &Cli, snap: SnapTolerance) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::MinCoverage(a) => commands::min_coverage(a, snap),
        Command::Coverage(a) => commands::coverage(a, snap),
        Command::Curve(a) => commands::curve(a, snap),
        Command::Candidates(a) => commands::candidates(a, snap),
        Command::Sweep(a) => commands::sweep(a, snap),
        Command::Verify(a) => verify::verify(a, snap),
    }
}
