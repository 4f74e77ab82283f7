//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)?
//! exponent := '-'? integer | '(' expr ')'        (must fold to an integer)
//! atom     := number | ident | func '(' expr ')' | '(' expr ')'
//! func     := 'sin' | 'cos' | 'sqrt'
//! ident    := [a-zA-Z_][a-zA-Z0-9_]*
//! number   := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`.

use thiserror::Error;

use super::ScalarExpr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown function `{name}` at byte {pos}")]
    UnknownFunction { name: String, pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                out.push((i, Tok::Op(c)));
                i += 1;
            }
            // U+2212 minus sign, occasionally pasted from typeset formulas.
            '\u{e2}' if text[i..].starts_with('\u{2212}') => {
                out.push((i, Tok::Op('-')));
                i += '\u{2212}'.len_utf8();
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v = lit.parse::<f64>().map_err(|_| ParseError::Syntax {
                    pos: start,
                    msg: format!("malformed number `{lit}`"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_owned())));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.bump();
            let rhs = self.term()?;
            lhs = if op == '+' {
                ScalarExpr::add(lhs, rhs)
            } else {
                ScalarExpr::sub(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.bump();
            let rhs = self.unary()?;
            lhs = if op == '*' {
                ScalarExpr::mul(lhs, rhs)
            } else {
                ScalarExpr::div(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.bump();
            return Ok(ScalarExpr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.bump();
            let pos = self.pos();
            let n = self.exponent()?;
            let n = integer_exponent(n).ok_or(ParseError::Syntax {
                pos,
                msg: "exponent must be an integer constant (use sqrt for fractional powers)".into(),
            })?;
            return Ok(ScalarExpr::pow(base, n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.bump();
                Ok(ScalarExpr::neg(self.exponent()?))
            }
            // Right associativity: x^2^3 = x^(2^3).
            _ => self.power(),
        }
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(ScalarExpr::constant(v)),
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let f: fn(ScalarExpr) -> ScalarExpr = match name.as_str() {
                        "sin" => ScalarExpr::sin,
                        "cos" => ScalarExpr::cos,
                        "sqrt" => ScalarExpr::sqrt,
                        _ => return Err(ParseError::UnknownFunction { name, pos }),
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(f(arg))
                } else {
                    Ok(ScalarExpr::var(&name))
                }
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(t) => {
                self.at -= 1;
                self.err(format!("unexpected token {t:?}"))
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.bump();
                Ok(())
            }
            _ => self.err("expected `)`"),
        }
    }
}

fn integer_exponent(e: ScalarExpr) -> Option<i32> {
    let v = e.as_const()?;
    (v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
}

pub fn parse_expr(text: &str) -> Result<ScalarExpr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.at < p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}
