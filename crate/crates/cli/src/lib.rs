//! Harness around the core toolkit: instance files, seeded random instance
//! generation, the property-suite runner and the report format shared by the
//! command-line verbs.

pub mod commands;
pub mod random;
pub mod report;
pub mod spec;
pub mod suites;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid instance file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] subdiag::Error),

    #[error("invalid instance: {0}")]
    Invalid(String),

    #[error("unknown suite name: {0}")]
    UnknownSuite(String),

    #[error("no such name in instance: {0}")]
    UnknownName(String),
}

impl HarnessError {
    /// Usage-class errors exit with status 2; failed checks exit with 1.
    pub fn is_usage(&self) -> bool {
        !matches!(self, HarnessError::Core(_))
    }
}
