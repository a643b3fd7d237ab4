//! MiniLang frontend: lexing, parsing, name resolution, and type checking.
//!
//! MiniLang is a small C-flavoured language with `int` / `float` / `bool`
//! scalars, one-dimensional arrays of those, and user-declared record types
//! with CamelCase names:
//!
//! ```text
//! type PointList { int n; float data[]; }
//!
//! int total(PointList ps, int scale) {
//!     int acc = 0;
//!     for (int i = 0; i < ps.n; i = i + 1) {
//!         acc = acc + scale;
//!     }
//!     return acc;
//! }
//! ```
//!
//! [`tokenize`] turns source text into tokens, [`parse`] builds a resolved and
//! type-annotated [`ProgramAst`]. Parsing is recursive descent with precedence
//! climbing for binary operators; the first error aborts (no recovery).
//! Resolution rejects undeclared identifiers, any redeclaration of a name
//! within a function (shadowing included), and call arity or argument type
//! mismatches. After resolution every expression node carries exactly one type
//! annotation.

mod ast;
mod lexer;
mod parser;
mod pretty;
mod resolve;
mod token;

pub use ast::{Ast, AstKind, AstNode, Basic, FuncSig, NodeId, ProgramAst, RecordInfo, Span, Ty};
pub use lexer::tokenize;
pub use parser::{parse, parse_source};
pub use pretty::{expr_to_string, pretty_print};
pub use token::{Token, TokenKind};

use thiserror::Error;

/// Frontend diagnostics. Rendered as `line:col: error: message`; callers that
/// know the file name prepend it to match `file:line:col: error: message`.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FrontendError {
    /// Illegal character or malformed token.
    #[error("{line}:{col}: error: {message}")]
    Lex { line: u32, col: u32, message: String },
    /// Unexpected token; `message` names what was expected.
    #[error("{line}:{col}: error: {message}")]
    Parse { line: u32, col: u32, message: String },
    /// Undeclared identifier, duplicate declaration, or a type/arity mismatch.
    #[error("{line}:{col}: error: {message}")]
    Resolve { line: u32, col: u32, message: String },
}

impl FrontendError {
    /// Position of the diagnostic as `(line, column)`, both 1-based.
    pub fn position(&self) -> (u32, u32) {
        match *self {
            FrontendError::Lex { line, col, .. }
            | FrontendError::Parse { line, col, .. }
            | FrontendError::Resolve { line, col, .. } => (line, col),
        }
    }
}
