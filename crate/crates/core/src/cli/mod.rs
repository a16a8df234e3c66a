//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 usage, 3 domain or model error, 4 refused by a
//! numerical-quality gate, 5 failed self-test.

mod config;
mod run;
mod selftest;

pub use config::{
    parse_args, Command, GoeScale, ModelKind, RunConfig, SeGate, SizeList, SlopeBand, TvSource,
};
pub use run::run;
pub use selftest::{selftest_report, SelftestLine};

use std::ffi::OsString;

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::edgeworth::EdgeworthError;
use crate::sim::{BatchIoError, SimError};

/// Variable capping the worker count; results do not depend on it.
pub const THREADS_ENV: &str = "CHAOS_EDGEWORTH_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error("{0}")]
    Clap(clap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Refused(_) => 4,
            CliError::Internal(_) => 5,
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) => 2,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<BatchIoError> for CliError {
    fn from(e: BatchIoError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<EdgeworthError> for CliError {
    fn from(e: EdgeworthError) -> Self {
        match e {
            EdgeworthError::NoisyMoment { .. } | EdgeworthError::TooFewSamples { .. } => {
                CliError::Refused(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Edgeworth(inner) => inner.into(),
            DiagnosticsError::Regression(_) => CliError::Refused(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn init_runtime() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses, runs and reports; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_runtime();
    match parse_args(argv).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            CliError::Clap(e).exit_code()
        }
        Err(e) => {
            eprintln!("chaos-edgeworth: {e}");
            e.exit_code()
        }
    }
}
