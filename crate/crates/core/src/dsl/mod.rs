//! The `.gft` text format.
//!
//! ```text
//! chart "pumps"
//!
//! signal pressure : analog_in unit "bar"
//! signal cmd_A : bool_out
//!
//! step S1 initial {}
//! step S2 {
//!   do cmd_A;
//! }
//!
//! trans T1 : S1 -> S2 when pressure < 2.5;
//! ```
//!
//! Statements are `chart`, `signal`, `step` and `trans`. Receptivities use
//! `!`, `&`, `|` (in decreasing precedence), comparisons of an analog
//! signal against a number, `re(sig)`, `X(step)` and `tmr(step, 5s)`.
//! `#` starts a comment.

mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::Serialize;

pub use parser::parse_chart;
pub use printer::print_chart;

/// 1-based line and column (in characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub code: String,
}

impl ParseDiagnostic {
    pub(crate) fn error(pos: Pos, code: &str, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            line: pos.line,
            column: pos.column,
            message: message.into(),
            code: code.to_owned(),
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}[{}]: {}", self.line, self.column, self.code, self.message)
    }
}

/// A successfully parsed chart and any warnings raised along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub chart: crate::chart::Chart,
    pub warnings: Vec<ParseDiagnostic>,
}

/// Source text with line endings normalized to LF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText(String);

impl SourceText {
    pub fn new(text: &str) -> Self {
        SourceText(text.replace("\r\n", "\n").replace('\r', "\n"))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, std::str::Utf8Error> {
        std::str::from_utf8(bytes).map(SourceText::new)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for SourceText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for parsing a string slice.
pub fn parse_str(text: &str) -> Result<Parsed, Vec<ParseDiagnostic>> {
    parse_chart(&SourceText::new(text))
}
