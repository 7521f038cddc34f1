use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the core library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sketch encloses no area")]
    EmptyRegion,
    #[error("invalid sketch: {0}")]
    InvalidSketch(String),
    #[error("invalid depth {0}: must be finite and positive")]
    InvalidDepth(f64),
    #[error("no valid depth pixel inside the sketch")]
    EmptyPointSet,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
    #[error("solver diverged at iteration {iteration}: non-finite expected energy")]
    SolverDivergence { iteration: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("joint {joint} value {value} outside limits [{min}, {max}]")]
    JointLimit { joint: usize, value: f64, min: f64, max: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("constraint gradient vanished at ({x}, {y}); cannot project")]
    StationaryPoint { x: f64, y: f64 },
    #[error("no feasible configuration found after {attempts} attempts")]
    Infeasible { attempts: usize },
    #[error("baseline failed: {0}")]
    BaselineFailure(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("malformed {kind} file: {message}")]
    Format { kind: &'static str, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format { kind, message: message.into() }
    }
}
