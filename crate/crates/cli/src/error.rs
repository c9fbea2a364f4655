use std::fmt;

use qeflab_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

/// Failure reported as `{"code": …, "message": …}` on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>, exit_code: i32) -> Self {
        CliError { code: code.into(), message: message.into(), exit_code }
    }

    pub fn config(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(code, message, EXIT_CONFIG)
    }

    pub fn mismatch(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(code, message, EXIT_MISMATCH)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new("OutputFailed", format!("{}: {err}", path.display()), EXIT_NUMERIC)
    }

    /// Model errors map to the config exit code, everything later in the
    /// pipeline to the numeric one.
    pub fn from_core(err: Error) -> Self {
        let exit = match err {
            Error::DimensionMismatch(_)
            | Error::InvalidArgument(_)
            | Error::NotAntisymmetric { .. }
            | Error::SingularTheta { .. }
            | Error::NotHurwitz { .. }
            | Error::SingularMho { .. }
            | Error::RankDeficientCoupling { .. }
            | Error::SingularS { .. }
            | Error::NonFinite => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        };
        Self::new(err.code(), err.to_string(), exit)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::from_core(err)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}
