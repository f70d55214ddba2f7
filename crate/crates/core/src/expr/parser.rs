//! Recursive-descent parser.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary minus, `^`.
//! `^` is right-associative and its exponent may only reference parameter
//! slots (`s1..sk`), which are constants once a map is compiled.

use super::ast::{BinOp, Expr, Func, Var, VarKind};
use super::lexer::{Token, TokenKind};
use super::ExprError;

pub fn parse(tokens: &[Token]) -> Result<Expr, ExprError> {
    let mut p = Parser { tokens, pos: 0 };
    if tokens.is_empty() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    if p.pos < tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> ExprError {
        let offset = self
            .tokens
            .get(pos)
            .map(|t| t.offset)
            .or_else(|| self.tokens.last().map(|t| t.offset + 1))
            .unwrap_or(0);
        ExprError::Syntax {
            position: pos,
            offset,
            message: message.into(),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        let caret = self.pos;
        if !self.eat(&TokenKind::Caret) {
            return Ok(base);
        }
        let exponent = self.exponent()?;
        if exponent.free_vars().iter().any(|v| v.kind != VarKind::S) {
            return Err(self.error_at(caret, "exponent must be a constant expression"));
        }
        Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
    }

    fn exponent(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.exponent()?)));
        }
        self.power()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let Some(kind) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        self.pos += 1;
        match kind {
            TokenKind::Num(v) => Ok(Expr::Const(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                if !self.eat(&TokenKind::RParen) {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if !self.eat(&TokenKind::LParen) {
                        return Err(self.error_at(start, format!("function '{name}' needs '('")));
                    }
                    let args = self.arguments()?;
                    if args.len() != func.arity() {
                        return Err(self.error_at(
                            start,
                            format!("arity: '{name}' takes {} argument(s), got {}", func.arity(), args.len()),
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else if let Some(var) = Var::from_ident(&name) {
                    Ok(Expr::Var(var))
                } else {
                    Err(self.error_at(start, format!("unknown identifier '{name}'")))
                }
            }
            _ => Err(self.error_at(start, "expected a number, variable, call or '('")),
        }
    }

    // after '(' of a call
    fn arguments(&mut self) -> Result<Vec<Expr>, ExprError> {
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&TokenKind::Comma) {
                continue;
            }
            if self.eat(&TokenKind::RParen) {
                return Ok(args);
            }
            return Err(self.error("expected ',' or ')' in argument list"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_str, Bindings};
    use super::*;

    fn eval(src: &str, x: &[f64]) -> f64 {
        parse_str(src).unwrap().evaluate(&Bindings::states(x)).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1+2*3", &[]), 7.0);
        assert_eq!(eval("(1+2)*3", &[]), 9.0);
        assert_eq!(eval("8/4/2", &[]), 1.0);
        assert_eq!(eval("2^3^2", &[]), 512.0);
        assert_eq!(eval("2*3^2", &[]), 18.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(eval("-x1^2", &[3.0]), -9.0);
        let e = parse_str("-x1^2").unwrap();
        assert!(matches!(e, Expr::Neg(_)));
        assert_eq!(eval("2^-1", &[]), 0.5);
        assert_eq!(eval("3*-x1", &[2.0]), -6.0);
    }

    #[test]
    fn call_arity_errors() {
        match parse_str("sin()") {
            Err(ExprError::Syntax { message, position, .. }) => {
                assert!(message.contains("arity"), "{message}");
                assert_eq!(position, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_str("min(x1)").is_err());
        assert!(parse_str("max(x1, x2, x3)").is_err());
    }

    #[test]
    fn malformed_inputs() {
        for src in ["", "1+", "(x1", "x1 x2", "foo(x1)", "sin", "x1^x2", "*2", "min(x1,)"] {
            assert!(
                matches!(parse_str(src), Err(ExprError::Syntax { .. })),
                "{src} should be a syntax error"
            );
        }
    }

    #[test]
    fn constant_exponent_expressions_allowed() {
        assert_eq!(eval("x1^(1+1)", &[3.0]), 9.0);
        let e = parse_str("x1^(s*2)").unwrap();
        let env = Bindings {
            x: &[3.0],
            s: &[1.0],
            ..Default::default()
        };
        assert_eq!(e.evaluate(&env).unwrap(), 9.0);
    }
}
