//! Process exit codes and the single-line error format.

use std::fmt;

use sdi_core::Error;

/// Documented exit statuses. Each failure class has its own code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitCode {
    Ok = 0,
    Internal = 1,
    Usage = 2,
    InvalidScene = 3,
    InvalidInput = 4,
    Io = 5,
    Config = 6,
    Infeasible = 7,
    Numerical = 8,
    BaselineFailure = 9,
    PortInUse = 10,
}

impl ExitCode {
    pub const ALL: [ExitCode; 11] = [
        Self::Ok,
        Self::Internal,
        Self::Usage,
        Self::InvalidScene,
        Self::InvalidInput,
        Self::Io,
        Self::Config,
        Self::Infeasible,
        Self::Numerical,
        Self::BaselineFailure,
        Self::PortInUse,
    ];

    pub fn code(self) -> i32 {
        self as i32
    }

    /// Machine-readable name printed in error lines.
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Internal => "internal",
            Self::Usage => "usage",
            Self::InvalidScene => "invalid-scene",
            Self::InvalidInput => "invalid-input",
            Self::Io => "io",
            Self::Config => "config",
            Self::Infeasible => "infeasible",
            Self::Numerical => "numerical",
            Self::BaselineFailure => "baseline-failure",
            Self::PortInUse => "port-in-use",
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }
}

impl fmt::Display for ExitCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error carried to `main`, printed as `error: <code-name>: <message>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new(ExitCode::Io, format!("{}: {err}", path.display()))
    }

    /// The one-line stderr rendering; newlines in the message are flattened.
    pub fn line(&self) -> String {
        format!("error: {}: {}", self.code, self.message.replace(['\n', '\r'], " "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

/// Exit code for a core error.
pub fn classify(err: &Error) -> ExitCode {
    match err {
        Error::InvalidScene(_)
        | Error::InvalidSketch(_)
        | Error::EmptyRegion
        | Error::EmptyPointSet
        | Error::InvalidDepth(_)
        | Error::InvalidCamera(_) => ExitCode::InvalidScene,
        Error::Format { .. } | Error::Parse { .. } | Error::Shape { .. } | Error::InsufficientData { .. } => {
            ExitCode::InvalidInput
        }
        Error::Io { .. } => ExitCode::Io,
        Error::Config(_) | Error::JointLimit { .. } => ExitCode::Config,
        Error::Infeasible { .. } => ExitCode::Infeasible,
        Error::Divergence { .. } | Error::SolverDivergence { .. } | Error::StationaryPoint { .. } => ExitCode::Numerical,
        Error::BaselineFailure(_) => ExitCode::BaselineFailure,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::new(classify(&err), err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
