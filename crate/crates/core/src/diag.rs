//! Located diagnostics shared by the parser, validator, weaver and compiler.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsml::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Error,
    Warning,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Error => f.write_str("ERROR"),
            Level::Warning => f.write_str("WARNING"),
        }
    }
}

/// One-based line and column inside a source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub const fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    pub code: String,
    pub message: String,
    pub location: Location,
    /// Which model file the location refers to, when known.
    pub model: Option<ModelKind>,
}

impl Diagnostic {
    pub fn error(code: &str, message: impl Into<String>, location: Location) -> Self {
        Self {
            level: Level::Error,
            code: code.to_string(),
            message: message.into(),
            location,
            model: None,
        }
    }

    pub fn warning(code: &str, message: impl Into<String>, location: Location) -> Self {
        Self {
            level: Level::Warning,
            code: code.to_string(),
            message: message.into(),
            location,
            model: None,
        }
    }

    pub fn in_model(mut self, kind: ModelKind) -> Self {
        self.model = Some(kind);
        self
    }

    pub fn is_error(&self) -> bool {
        self.level == Level::Error
    }

    /// `SEVERITY CODE file:line:col message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{} {} {}:{} {}",
            self.level, self.code, file, self.location, self.message
        )
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
