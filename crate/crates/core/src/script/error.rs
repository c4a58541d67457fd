use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    UnknownKeyword,
    MalformedRule,
    UnterminatedBlock,
    DanglingIndentation,
    DuplicateId,
    Malformed,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::UnknownKeyword => "unknown keyword",
            ParseErrorKind::MalformedRule => "malformed rule",
            ParseErrorKind::UnterminatedBlock => "unterminated block",
            ParseErrorKind::DanglingIndentation => "dangling indentation",
            ParseErrorKind::DuplicateId => "duplicate id",
            ParseErrorKind::Malformed => "malformed line",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("line {line}, column {column}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { kind, line, column: column.max(1), message: message.into() }
    }
}
