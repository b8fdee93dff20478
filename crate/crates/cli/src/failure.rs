//! Failures and their exit codes.

use bandedge::Error;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Exit 1: files could not be read or written.
    Io,
    /// Exit 1: the matrix under validation breaks an invariant.
    InvalidMatrix,
    /// Exit 2.
    Config,
    /// Exit 3.
    Budget,
    /// Exit 4.
    Numeric,
}

impl FailureKind {
    pub fn exit_code(self) -> u8 {
        match self {
            FailureKind::Io | FailureKind::InvalidMatrix => 1,
            FailureKind::Config => 2,
            FailureKind::Budget => 3,
            FailureKind::Numeric => 4,
        }
    }

    fn label(self) -> &'static str {
        match self {
            FailureKind::Io => "io",
            FailureKind::InvalidMatrix => "invalid_matrix",
            FailureKind::Config => "config",
            FailureKind::Budget => "budget",
            FailureKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
    pub line: Option<usize>,
    pub field: Option<String>,
}

impl Failure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            line: None,
            field: None,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(FailureKind::Config, message)
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn on_field(mut self, field: &str) -> Self {
        self.field = Some(field.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        let mut body = json!({
            "kind": self.kind.label(),
            "exit_code": self.kind.exit_code(),
            "message": self.message,
        });
        if let Some(line) = self.line {
            body["line"] = json!(line);
        }
        if let Some(field) = &self.field {
            body["field"] = json!(field);
        }
        json!({ "error": body }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e.root() {
            Error::Budget { .. } => FailureKind::Budget,
            Error::Numeric(_) | Error::Structural(_) | Error::InsufficientData(_) => FailureKind::Numeric,
            _ => FailureKind::Config,
        };
        let mut f = Failure::new(kind, e.to_string());
        if let Error::Parse { line, .. } = e.root() {
            f.line = Some(*line);
        }
        f
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(FailureKind::Io, e.to_string())
    }
}
