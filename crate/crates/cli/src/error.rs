use serde::Serialize;

/// Failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Configuration,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Configuration => exit::CONFIGURATION,
            ErrorKind::Numerical | ErrorKind::Io => exit::NUMERICAL,
        }
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const ASSERTION: i32 = 1;
    pub const CONFIGURATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Machine-readable error, printed as JSON and embedded in summaries.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{kind:?} error{}: {message}", field.as_ref().map(|f| format!(" at {f}")).unwrap_or_default())]
pub struct ErrorObject {
    pub kind: ErrorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<String>,
    pub message: String,
}

impl ErrorObject {
    pub fn config(message: impl Into<String>) -> Self {
        ErrorObject {
            kind: ErrorKind::Configuration,
            field: None,
            analysis: None,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        ErrorObject {
            kind: ErrorKind::Numerical,
            field: None,
            analysis: None,
            message: message.into(),
        }
    }

    pub fn at(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        ErrorObject {
            kind: ErrorKind::Io,
            field: None,
            analysis: None,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<gat_core::Error> for ErrorObject {
    fn from(e: gat_core::Error) -> Self {
        let kind = if e.is_configuration() {
            ErrorKind::Configuration
        } else {
            ErrorKind::Numerical
        };
        ErrorObject {
            kind,
            field: None,
            analysis: None,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ErrorObject>;
