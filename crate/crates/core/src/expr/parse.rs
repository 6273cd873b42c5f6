//! Prefix s-expression text: `(+ (sin x1) (* x2 0.5))`.

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    /// Byte offset into the input.
    pub offset: usize,
    pub message: String,
}

/// Prints a constant rounded to 9 significant digits in its shortest form,
/// switching to exponent notation outside `[1e-5, 1e16)`.
pub fn format_constant(c: f64) -> String {
    if c == 0.0 {
        return "0".to_string();
    }
    if !c.is_finite() {
        return c.to_string();
    }
    let rounded: f64 = format!("{c:.8e}").parse().expect("scientific notation reparses");
    if rounded.abs() < 1e-5 || rounded.abs() >= 1e16 {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

pub fn parse(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b')') => Err(self.error("unexpected ')'")),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let op_start = self.pos;
                let op = self.atom().to_string();
                let node = match op.as_str() {
                    "sin" | "cos" => {
                        let u = if op == "sin" { UnaryOp::Sin } else { UnaryOp::Cos };
                        Expr::unary(u, self.expr()?)
                    }
                    "+" | "-" | "*" => {
                        let b = match op.as_str() {
                            "+" => BinaryOp::Add,
                            "-" => BinaryOp::Sub,
                            _ => BinaryOp::Mul,
                        };
                        let l = self.expr()?;
                        let r = self.expr()?;
                        Expr::binary(b, l, r)
                    }
                    "" if self.peek().is_none() => return Err(self.error("unexpected end of input")),
                    _ => {
                        return Err(SyntaxError { offset: op_start, message: format!("unknown operator {op:?}") })
                    }
                };
                self.skip_ws();
                match self.peek() {
                    Some(b')') => {
                        self.pos += 1;
                        Ok(node)
                    }
                    None => Err(self.error("unexpected end of input")),
                    Some(_) => Err(self.error("expected ')'")),
                }
            }
            Some(_) => {
                let start = self.pos;
                let tok = self.atom();
                let bad = |message: String| SyntaxError { offset: start, message };
                if let Some(digits) = tok.strip_prefix('x') {
                    return match digits.parse::<u16>() {
                        Ok(k) if k >= 1 && digits.bytes().all(|b| b.is_ascii_digit()) => Ok(Expr::Var(k)),
                        _ => Err(bad(format!("invalid variable {tok:?}"))),
                    };
                }
                let numeric = tok.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b));
                match tok.parse::<f64>() {
                    Ok(v) if numeric && v.is_finite() => Ok(Expr::Const(v)),
                    _ => Err(bad(format!("invalid token {tok:?}"))),
                }
            }
        }
    }
}
