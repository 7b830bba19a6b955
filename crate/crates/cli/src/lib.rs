//! Commands behind the `synscale` binary.
//!
//! Every command returns `Ok(())` or a [`CliError`] whose
//! [`exit_code`](CliError::exit_code) separates user mistakes (2) from
//! internal failures (1).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::{Parser, Subcommand};
use synscale::Violation;

use commands::{CalibrateArgs, MemReportArgs, OccupancyArgs, SimulateArgs, ValidateArgs};

/// Spiking network simulation and synaptic scale calibration.
#[derive(Debug, Parser)]
#[command(name = "synscale", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its raster and summary.
    Simulate(SimulateArgs),
    /// Sweep nConn x gScale, pick rate-matching scales and fit the curve.
    #[command(alias = "sweep-and-calibrate")]
    Calibrate(CalibrateArgs),
    /// GPU occupancy of a kernel, or the best block size with --recommend.
    Occupancy(OccupancyArgs),
    /// Element counts of sparse and dense weight storage.
    MemReport(MemReportArgs),
    /// Check a config without running it.
    Validate(ValidateArgs),
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, stdout),
        Command::Calibrate(a) => commands::calibrate(a, stdout, stderr),
        Command::Occupancy(a) => commands::occupancy_report(a, stdout),
        Command::MemReport(a) => commands::mem_report(a, stdout),
        Command::Validate(a) => commands::validate(a, stdout),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable or malformed config, invalid arguments.
    User(String),
    /// The network failed validation.
    Invalid(Vec<Violation>),
    /// Anything else, e.g. an output file could not be written.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) | CliError::Invalid(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Invalid(v) => {
                write!(f, "error: network specification is invalid")?;
                for violation in v {
                    write!(f, "\n  {violation}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<synscale::Error> for CliError {
    fn from(e: synscale::Error) -> Self {
        match e {
            synscale::Error::Validation(v) => CliError::Invalid(v),
            synscale::Error::Io(e) => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}
