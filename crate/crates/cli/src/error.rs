use std::fmt;
use std::process::ExitCode;

use fried_core::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or parameters (exit 2).
    Config(String),
    /// Unreadable or unwritable files (exit 3).
    Io(String),
    /// Input that carries no usable information (exit 4).
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Degenerate(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate input: {m}"),
        }
    }
}

fn classify(e: &Error) -> fn(String) -> CliError {
    match e {
        Error::SampleFailed { source, .. } => classify(source),
        Error::UninformativeImage(_) | Error::RankDeficient(_) | Error::TooFewSamples { .. } => {
            CliError::Degenerate
        }
        Error::InvalidDimensions { .. } => CliError::Degenerate,
        _ if e.is_io() => CliError::Io,
        _ => CliError::Config,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        classify(&e)(e.to_string())
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
