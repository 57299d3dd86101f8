//! Source handling and diagnostics.

use std::fmt;
use std::path::{Path, PathBuf};

use super::ast::Span;

/// An input program plus the offset→(line, column) index used to position
/// diagnostics.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub path: PathBuf,
    pub text: String,
    /// Byte offset of the start of each line.
    line_starts: Vec<u32>,
}

impl SourceProgram {
    pub fn new(path: impl AsRef<Path>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_starts = vec![0u32];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i as u32 + 1);
            }
        }
        SourceProgram {
            path: path.as_ref().to_path_buf(),
            text,
            line_starts,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(SourceProgram::new(path, text))
    }

    /// 1-based (line, column) for a byte offset.
    pub fn line_col(&self, offset: u32) -> (u32, u32) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line as u32 + 1, offset - self.line_starts[line] + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

/// One `file:line:col: severity: message` diagnostic.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl Diagnostic {
    pub fn error(source: &SourceProgram, span: Span, message: impl Into<String>) -> Self {
        let (line, col) = source.line_col(span.lo);
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            line,
            col,
        }
    }

    pub fn render(&self, path: &Path) -> String {
        format!(
            "{}:{}:{}: {}: {}",
            path.display(),
            self.line,
            self.col,
            self.severity,
            self.message
        )
    }
}

/// Diagnostics bundled as the error side of a parse.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{}", self.render())]
pub struct Diagnostics {
    pub path: PathBuf,
    pub items: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn render(&self) -> String {
        self.items
            .iter()
            .map(|d| d.render(&self.path))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
