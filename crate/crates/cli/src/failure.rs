use std::fmt;
use std::path::Path;

use serde::Serialize;

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Failure::Io(format!("{}: {err}", path.display()))
    }

    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numeric(_) => "numeric",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }

    /// Machine-readable report for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            code: i32,
            message: &'a str,
        }
        let report = Report { error: self.kind(), code: self.code(), message: self.message() };
        serde_json::to_string(&report).expect("error report serializes")
    }
}

impl From<setdp::Error> for Failure {
    fn from(e: setdp::Error) -> Self {
        match e {
            setdp::Error::Numeric { .. } | setdp::Error::Lp(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;
