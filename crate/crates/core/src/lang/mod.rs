//! Caplet frontend: lexing, parsing, printing, type checking and
//! monomorphization into the typed IR consumed by the analyses.

pub mod ast;
pub mod ir;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;
pub mod types;

use std::fmt;

pub use parser::{parse_expr, parse_file, parse_program};
pub use typeck::{typecheck, SourceFile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub file: u16,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { file: 0, line, col }
    }

    pub fn in_file(self, file: u16) -> Span {
        Span { file, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic { span, message: message.into() }
    }

    /// `file:line:col: error: message`
    pub fn render(&self, file_name: &str) -> String {
        format!("{file_name}:{}:{}: error: {}", self.span.line, self.span.col, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}
