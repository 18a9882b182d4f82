use std::fmt;

use levkit_core::Error;

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit 2).
    Config(String),
    /// A numerical routine failed on valid input (exit 3).
    Numerical(String),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Failure::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    /// Prefixes the message with the config path it concerns.
    pub fn at(self, path: &str) -> Self {
        match self {
            Failure::Config(m) => Failure::Config(format!("{path}: {m}")),
            Failure::Numerical(m) => Failure::Numerical(format!("{path}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Quadrature { .. }
            | Error::Unstable(_)
            | Error::NotConverged(_)
            | Error::SeriesTooShort { .. }
            | Error::Fit(_) => Failure::Numerical(e.to_string()),
            Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::Domain { .. }
            | Error::InvalidParameter { .. }
            | Error::UnitParse(_)
            | Error::GeometryOverlap(_) => Failure::Config(e.to_string()),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;
