use std::io;

use thiserror::Error;

/// Errors raised anywhere in the flowsense pipeline.
///
/// Variants are grouped by how a caller is expected to react; the CLI maps
/// them onto process exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical-domain error: {0}")]
    Numerical(String),
    #[error("training error in `{param}`: {reason}")]
    Training { param: String, reason: String },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("solver blow-up at t = {time:.4} (max Courant {courant:.3}): {reason}")]
    BlowUp {
        time: f64,
        courant: f64,
        reason: String,
    },
    #[error("state error: {0}")]
    State(String),
    #[error("action contract violated: {0}")]
    Action(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("shedding not detected: {0}")]
    NonShedding(String),
    #[error("missing artifact `{artifact}`; rerun stage `{stage}` first")]
    MissingArtifact { artifact: String, stage: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for runtime and
    /// numerical failures. Validation failures (code 1) are not errors; they
    /// are reported through the validation report.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Action(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
