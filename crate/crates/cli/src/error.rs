use serde::Serialize;

/// A failure with a stable machine-readable code and a process exit status.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("{code}: {message}")]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub exit: i32,
}

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_INPUT,
        }
    }

    pub fn infeasible(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_INFEASIBLE,
        }
    }

    pub fn not_converged(message: impl Into<String>) -> Self {
        Self {
            code: "not_converged",
            message: message.into(),
            exit: EXIT_NOT_CONVERGED,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::input("io_error", format!("{}: {err}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}
