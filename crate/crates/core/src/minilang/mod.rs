//! MiniLang: a small imperative language with integer globals, functions,
//! and statement-level calls.
//!
//! Programs are deterministic and side-effect free apart from global state,
//! so running two versions of a program and comparing final globals is a
//! well-defined behavioral comparison.
//!
//! ```text
//! global total = 0;
//! fn add(n) { total = total + n; }
//! fn main() { call add(3); }
//! ```

mod ast;
mod interp;
mod lexer;
mod parser;
mod render;

pub use ast::*;
pub use interp::{execute, execute_with_depth, ExecStatus, ExecutionOutcome, DEFAULT_CALL_DEPTH, DEFAULT_STEP_LIMIT};
pub use parser::{check, parse, parse_units, DEFAULT_UNIT};
pub use render::{render_expr, render_function, render_program, render_unit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("duplicate declaration of `{name}` at line {line}")]
    Duplicate { name: String, line: usize },
    #[error("call to unknown function `{name}` at line {line}")]
    UnknownFunction { name: String, line: usize },
    #[error("`{name}` takes {expected} argument(s) but {found} given at line {line}")]
    Arity { name: String, expected: usize, found: usize, line: usize },
    #[error("program must define exactly one parameterless `main`")]
    Main,
    #[error("{unit}: {source}")]
    Unit { unit: String, source: Box<ParseError> },
}
