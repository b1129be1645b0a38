//! File loading, reports and rendering around `mpicheck-core`.

pub mod dot;
pub mod report;
pub mod text;

use std::path::{Path, PathBuf};

use mpicheck_core::model::{validate, Program, ValidationError};
use mpicheck_core::syntax::{parse, ParseError};
use mpicheck_core::CheckOptions;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{error}", path.display())]
    Parse { error: Box<ParseError>, path: PathBuf },
    #[error("{}: {error}", path.display())]
    Invalid { error: Box<ValidationError>, path: PathBuf },
}

pub fn load(path: &Path) -> Result<Program, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let program = parse(&text).map_err(|error| LoadError::Parse {
        error: Box::new(error),
        path: path.to_path_buf(),
    })?;
    validate(program).map_err(|error| LoadError::Invalid {
        error: Box::new(error),
        path: path.to_path_buf(),
    })
}

pub const MAX_EVENTS_VAR: &str = "MPICHECK_MAX_EVENTS";

/// Default options, with the event cap taken from `MPICHECK_MAX_EVENTS`
/// when set.
pub fn options_from_env() -> Result<CheckOptions, String> {
    let mut options = CheckOptions::default();
    if let Ok(v) = std::env::var(MAX_EVENTS_VAR) {
        options.max_events = v
            .trim()
            .parse()
            .map_err(|_| format!("{MAX_EVENTS_VAR} must be a positive integer, got `{v}`"))?;
    }
    Ok(options)
}
