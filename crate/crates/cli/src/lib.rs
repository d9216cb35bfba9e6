//! Library side of the `idnc` binary: sweep specifications, CSV output,
//! fixture files and the verification suites.

pub mod commands;
pub mod config;
pub mod csv;
pub mod fixture;
pub mod verify;

use thiserror::Error;

/// Failure classes of the command line, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses a positive count written as an integer or in scientific notation
/// (`100000`, `1e5`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return if n == 0 { Err("count must be at least 1".into()) } else { Ok(n) };
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 1.0 && x.fract() == 0.0 && x <= 9.007_199_254_740_992e15 => Ok(x as u64),
        _ => Err(format!("expected a positive integer count, got {s:?}")),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(CliError::runtime)?;
            Ok(pool.install(f))
        }
    }
}
