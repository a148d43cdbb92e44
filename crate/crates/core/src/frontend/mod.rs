//! Model language: lexing, parsing, static validation and rendering.

pub mod ast;
mod lexer;
mod parser;
mod render;
mod validate;

use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_program;
pub use render::{render, render_dist, render_expr, render_index_term, render_stmt, render_var_ref};
pub use validate::{validate, Diagnostic, DiagnosticKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: illegal character `{ch}`")]
    IllegalCharacter { ch: char, line: u32, col: u32 },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax { line: u32, col: u32, expected: String, found: String },
}

impl FrontendError {
    pub fn position(&self) -> (u32, u32) {
        match self {
            FrontendError::IllegalCharacter { line, col, .. } | FrontendError::Syntax { line, col, .. } => {
                (*line, *col)
            }
        }
    }
}
