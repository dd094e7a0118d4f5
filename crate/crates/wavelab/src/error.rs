//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid grid construction parameters.
    Grid(String),
    /// Invalid solver or run parameters (CFL range, domain sizing, data).
    Run(String),
    /// Malformed or inconsistent configuration input.
    Config(String),
    /// A jet lacking a second-time-derivative rule was asked for one.
    MissingSourceRule(String),
    /// Invalid diagnostic request (empty window, bad column, ...).
    Diagnostics(String),
    /// Unknown inequality or corpus problem.
    Inequality(String),
    /// Filesystem problems while writing reports.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Grid(m) => write!(f, "grid error: {m}"),
            Error::Run(m) => write!(f, "run error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::MissingSourceRule(m) => write!(f, "missing source rule: {m}"),
            Error::Diagnostics(m) => write!(f, "diagnostics error: {m}"),
            Error::Inequality(m) => write!(f, "inequality error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Error {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
