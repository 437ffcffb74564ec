use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("eigensolver did not converge after {iterations} iterations (index {index})")]
    NoConvergence { iterations: usize, index: usize },

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemIndex { index: usize, count: usize },

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("argument {arg} = {value} outside supported domain {domain}")]
    Domain { arg: &'static str, value: f64, domain: &'static str },

    #[error("pulse schedule error: {0}")]
    Schedule(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("mode {0} is not active on this device")]
    InactiveMode(usize),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("program parse error on line {line}: {msg}")]
    Program { line: usize, msg: String },

    #[error("invalid gate: {0}")]
    Gate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }
}
