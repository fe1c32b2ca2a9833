//! Failure classes and their exit statuses.

use std::fmt;

/// Exit status 2: the invocation itself is invalid.
pub const EXIT_USAGE: i32 = 2;
/// Exit status 3: an input file could not be read or parsed.
pub const EXIT_INPUT: i32 = 3;
/// Exit status 4: the computation failed.
pub const EXIT_COMPUTE: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Input,
    Compute,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            kind: Kind::Usage,
            source: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => EXIT_USAGE,
            Kind::Input => EXIT_INPUT,
            Kind::Compute => EXIT_COMPUTE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<covbreak::Error> for CliError {
    fn from(e: covbreak::Error) -> Self {
        let kind = match e {
            covbreak::Error::InvalidParameter(_) | covbreak::Error::EmptyCandidates => Kind::Usage,
            _ => Kind::Compute,
        };
        Self {
            kind,
            source: e.into(),
        }
    }
}

/// Tags a fallible step with its failure class.
pub trait Classify<T> {
    fn input(self) -> Result<T, CliError>;
    fn compute(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            kind: Kind::Input,
            source: e.into(),
        })
    }

    fn compute(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            kind: Kind::Compute,
            source: e.into(),
        })
    }
}
