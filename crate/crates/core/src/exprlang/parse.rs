//! Recursive-descent parser for the jet-variable expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | constant | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `t<d>`, `x<d>` and `v<d>_<d>` with one-based indices.

use thiserror::Error;

use super::ast::{BinaryOp, Constant, Expr, UnaryOp, VariableId, MAX_DIM};
use crate::Dims;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("index out of range in `{name}` at offset {offset} (m={m}, n={n})")]
    IndexOutOfRange {
        offset: usize,
        name: String,
        m: usize,
        n: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::IndexOutOfRange { offset, .. } => *offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == b'.' {
            let int_digits = self.digits();
            let mut frac_digits = 0;
            if self.src.get(self.pos) == Some(&b'.') {
                self.pos += 1;
                frac_digits = self.digits();
            }
            if int_digits + frac_digits == 0 {
                return Err(syntax(start, "malformed number"));
            }
            if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
                let save = self.pos;
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                    self.pos += 1;
                }
                if self.digits() == 0 {
                    // Not an exponent; leave `e` for the next token.
                    self.pos = save;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let value: f64 = text.parse().map_err(|_| syntax(start, "malformed number"))?;
            return Ok((start, Tok::Num(value)));
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((start, Tok::Ident(text.to_string())));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                return Err(syntax(
                    start,
                    &format!("unexpected character `{}`", c as char),
                ))
            }
        };
        Ok((start, tok))
    }
}

fn syntax(offset: usize, message: &str) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.to_string(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    dims: Dims,
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        let (offset, tok) = self.lexer.next()?;
        self.offset = offset;
        self.tok = tok;
        Ok(())
    }

    fn unexpected(&self) -> ParseError {
        match &self.tok {
            Tok::End => syntax(self.offset, "unexpected end of input"),
            Tok::Num(x) => syntax(self.offset, &format!("unexpected number {x}")),
            Tok::Ident(s) => syntax(self.offset, &format!("unexpected identifier `{s}`")),
            Tok::Op(c) => syntax(self.offset, &format!("unexpected `{c}`")),
            Tok::LParen => syntax(self.offset, "unexpected `(`"),
            Tok::RParen => syntax(self.offset, "unexpected `)`"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = self.tok {
            self.advance()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::binary_raw(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = self.tok {
            self.advance()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::binary_raw(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(Expr::unary_raw(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.advance()?;
            let exponent = self.unary()?;
            return Ok(Expr::binary_raw(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(x) => {
                self.advance()?;
                Ok(Expr::num(x))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.unexpected());
                }
                self.advance()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let offset = self.offset;
                self.advance()?;
                if let Some(op) = UnaryOp::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(self.unexpected());
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.unexpected());
                    }
                    self.advance()?;
                    return Ok(Expr::unary_raw(op, arg));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::constant(Constant::Pi)),
                    "e" => return Ok(Expr::constant(Constant::E)),
                    _ => {}
                }
                self.variable(&name, offset).map(Expr::var)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<VariableId, ParseError> {
        let unknown = || ParseError::UnknownIdentifier {
            offset,
            name: name.to_string(),
        };
        let out_of_range = || ParseError::IndexOutOfRange {
            offset,
            name: name.to_string(),
            m: self.dims.m,
            n: self.dims.n,
        };
        let index = |s: &str| -> Result<usize, ParseError> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(unknown());
            }
            s.parse::<usize>().map_err(|_| out_of_range())
        };
        let (head, rest) = name.split_at(1);
        let var = match head {
            "t" => {
                let a = index(rest)?;
                if a == 0 || a > self.dims.m {
                    return Err(out_of_range());
                }
                VariableId::t(a - 1)
            }
            "x" => {
                let i = index(rest)?;
                if i == 0 || i > self.dims.n {
                    return Err(out_of_range());
                }
                VariableId::x(i - 1)
            }
            "v" => {
                let (i, a) = rest.split_once('_').ok_or_else(unknown)?;
                let (i, a) = (index(i)?, index(a)?);
                if i == 0 || i > self.dims.n || a == 0 || a > self.dims.m {
                    return Err(out_of_range());
                }
                VariableId::v(i - 1, a - 1)
            }
            _ => return Err(unknown()),
        };
        debug_assert!(self.dims.m <= MAX_DIM && self.dims.n <= MAX_DIM);
        Ok(var)
    }
}

/// Parses `text` into an expression over a jet space of dimensions `dims`.
///
/// The tree is returned exactly as written: no simplification is applied.
pub fn parse(text: &str, dims: Dims) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        lexer: Lexer {
            src: text.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        offset: 0,
        dims,
    };
    parser.advance()?;
    let e = parser.expr()?;
    if parser.tok != Tok::End {
        return Err(parser.unexpected());
    }
    Ok(e)
}
