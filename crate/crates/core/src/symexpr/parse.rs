//! Infix expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? INTEGER)?
//! atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimals with an optional exponent and are stored exactly.
//! Identifiers are `t`, `tau`, and `<d|dd>?<q|u|p><index>` with an optional
//! `_tau[k]` (delayed) or `_adv[k]` (advanced) suffix; `sin cos exp log` are
//! the functions. The parser builds the raw tree without simplifying.

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::{Expr, Func, Number, Symbol, SymbolKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} (at byte {offset})")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub message: String,
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error(format!("unexpected `{}`", p.rest_char())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { offset: self.pos, message: message.into() }
    }

    fn rest_char(&self) -> char {
        self.src[self.pos..].chars().next().unwrap_or(' ')
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(-self.term()?);
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.eat('/') {
                factors.push(self.unary()?.pow(-1));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Product(factors) })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        let negative = self.eat('-');
        self.skip_ws();
        let digits_at = self.pos;
        let digits: String = self.src[self.pos..].chars().take_while(|c| c.is_ascii_digit()).collect();
        let after = self.pos + digits.len();
        let follows_number =
            self.src[after..].chars().next().is_some_and(|c| c == '.' || c.is_alphanumeric() || c == '_');
        if digits.is_empty() || follows_number {
            self.pos = start;
            return Err(self.error("exponent must be an integer literal"));
        }
        self.pos = after;
        let n: i64 =
            digits.parse().map_err(|_| ParseError { offset: digits_at, message: "exponent out of range".into() })?;
        Ok(base.pow(if negative { -n } else { n }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        let mut mantissa = String::new();
        let mut frac_digits = 0u32;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            mantissa.push(bytes[i] as char);
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                mantissa.push(bytes[i] as char);
                frac_digits += 1;
                i += 1;
            }
        }
        if mantissa.is_empty() {
            return Err(self.error("malformed number"));
        }
        let mut exponent: i64 = 0;
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            let mut sign = 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                if bytes[j] == b'-' {
                    sign = -1;
                }
                j += 1;
            }
            let exp_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == exp_start {
                self.pos = i;
                return Err(self.error("malformed exponent"));
            }
            exponent = sign
                * self.src[exp_start..j]
                    .parse::<i64>()
                    .map_err(|_| ParseError { offset: exp_start, message: "exponent out of range".into() })?;
            i = j;
        }
        if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
            self.pos = i;
            return Err(self.error("malformed number"));
        }
        self.pos = i;
        let mant: BigInt =
            mantissa.parse().map_err(|_| ParseError { offset: start, message: "malformed number".into() })?;
        let scale = exponent - frac_digits as i64;
        if scale.abs() > 4000 {
            return Err(ParseError { offset: start, message: "number out of range".into() });
        }
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(mant * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mant, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Expr::Const(Number::Rational(value)))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let name: String =
            self.src[self.pos..].chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        self.pos += name.len();
        if let Some(f) = Func::from_name(&name) {
            if !self.eat('(') {
                return Err(self.error(format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Expr::apply(f, arg));
        }
        symbol_from_name(&name)
            .map(Expr::Sym)
            .ok_or(ParseError { offset: start, message: format!("unknown identifier `{name}`") })
    }
}

/// Inverse of `Symbol`'s `Display`.
pub(crate) fn symbol_from_name(name: &str) -> Option<Symbol> {
    match name {
        "t" => return Some(Symbol::time()),
        "tau" => return Some(Symbol::delay()),
        _ => {}
    }
    let (base, offset) = match name.find('_') {
        None => (name, 0),
        Some(at) => {
            let (base, suffix) = (&name[..at], &name[at + 1..]);
            let parse_count = |s: &str| -> Option<i32> {
                if s.is_empty() {
                    Some(1)
                } else if s.starts_with('0') {
                    None
                } else {
                    s.parse().ok().filter(|k| *k >= 1)
                }
            };
            if let Some(k) = suffix.strip_prefix("tau") {
                (base, -parse_count(k)?)
            } else {
                (base, parse_count(suffix.strip_prefix("adv")?)?)
            }
        }
    };
    let kinds = [
        ("ddq", SymbolKind::StateDDot),
        ("dq", SymbolKind::StateDot),
        ("q", SymbolKind::State),
        ("du", SymbolKind::ControlDot),
        ("u", SymbolKind::Control),
        ("dp", SymbolKind::CostateDot),
        ("p", SymbolKind::Costate),
    ];
    for (prefix, kind) in kinds {
        if let Some(digits) = base.strip_prefix(prefix) {
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            if digits.starts_with('0') {
                return None;
            }
            let index: u32 = digits.parse().ok()?;
            return Some(Symbol::component(kind, index).shifted(offset));
        }
    }
    None
}
