//! Arithmetic expression language for defining system maps in configuration
//! files, with symbolic differentiation so Jacobians are analytic.
//!
//! Grammar summary: decimal literals, variables `x1..`, `u1..`, `z1..`,
//! `y1..`, parameter slots `s1..` (bare `s` means `s1`), the operators
//! `+ - * / ^`, and the functions `sin cos exp tanh sqrt abs sat min max`.
//! `sat(v)` is the unit saturation `max(-1, min(1, v))`.

mod ast;
mod compile;
mod diff;
mod lexer;
mod parser;

use thiserror::Error;

pub use ast::{sat, BinOp, Bindings, Expr, Func, Var, VarKind};
pub use compile::{compile_map, CompiledMap, InputLayout};
pub use diff::differentiate;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("lexical error at byte {offset}: unexpected '{found}'")]
    Lex { offset: usize, found: String },
    #[error("syntax error at token {position} (byte {offset}): {message}")]
    Syntax {
        position: usize,
        offset: usize,
        message: String,
    },
    #[error("unbound variable {0}")]
    Unbound(Var),
    #[error("domain error in {func} at {arg}: {detail}")]
    Domain {
        func: &'static str,
        arg: f64,
        detail: &'static str,
    },
    #[error("output {output} references undeclared variable {var}")]
    Undeclared { output: usize, var: Var },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Tokenizes and parses in one step.
pub fn parse_str(source: &str) -> Result<Expr, ExprError> {
    parse(&tokenize(source)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let x = |v: f64| parse_str("0.5*x1").unwrap().evaluate(&Bindings::states(&[v]));
        assert_eq!(x(2.0).unwrap(), 1.0);
        let s = parse_str("sat(x1)").unwrap();
        assert_eq!(s.evaluate(&Bindings::states(&[3.0])).unwrap(), 1.0);
    }

    #[test]
    fn sqrt_of_negative_is_domain_error() {
        let e = parse_str("sqrt(x1)").unwrap();
        assert!(matches!(
            e.evaluate(&Bindings::states(&[-1.0])),
            Err(ExprError::Domain { func: "sqrt", .. })
        ));
    }

    #[test]
    fn unbound_variable() {
        let e = parse_str("x1 + u1").unwrap();
        assert_eq!(
            e.evaluate(&Bindings::states(&[1.0])),
            Err(ExprError::Unbound(Var::new(VarKind::U, 1)))
        );
    }

    #[test]
    fn division_by_zero_reported() {
        let e = parse_str("1/x1").unwrap();
        assert!(e.evaluate(&Bindings::states(&[0.0])).is_err());
    }
}
