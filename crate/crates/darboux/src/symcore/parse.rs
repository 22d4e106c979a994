//! Recursive-descent parser for the scalar expression grammar.
//!
//! Grammar (ASCII): numbers (integer, decimal, scientific — kept exact as
//! rationals), identifiers (ASCII letters, digits, underscore), `+ - * / ^`,
//! parentheses, `exp log sin cos sqrt`, opaque application `f(x, ...)`,
//! derivative markers `f'(x)`, `f''(x)` (any number of primes) and
//! `pd(f,i1,...,ik)(args)` for multi-argument partials, definite integrals
//! `int(lo, hi, body, dummy)`. Precedence: power > unary minus > `* /` > `+ -`;
//! power is right-associative.
//!
//! Differentials `d(...)` and the wedge `/\` belong to the form grammar in the
//! geometry module; `d(` here is rejected with a context hint.

use super::{Expr, Q};
use num::BigInt;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        position,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(Q),
    Ident(String),
    Primes(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Wedge,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_tok(&mut self) -> Result<Option<(usize, Tok)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos] as char;
        let tok = match c {
            '+' => {
                self.pos += 1;
                Tok::Plus
            }
            '-' => {
                self.pos += 1;
                Tok::Minus
            }
            '*' => {
                self.pos += 1;
                Tok::Star
            }
            '/' => {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] == b'\\' {
                    self.pos += 1;
                    Tok::Wedge
                } else {
                    Tok::Slash
                }
            }
            '^' => {
                self.pos += 1;
                Tok::Caret
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            ',' => {
                self.pos += 1;
                Tok::Comma
            }
            '\'' => {
                let mut n = 0;
                while self.pos < self.src.len() && self.src[self.pos] == b'\'' {
                    n += 1;
                    self.pos += 1;
                }
                Tok::Primes(n)
            }
            '0'..='9' | '.' => {
                let mut intpart = String::new();
                let mut fracpart = String::new();
                let mut exppart: i64 = 0;
                while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit() {
                    intpart.push(self.src[self.pos] as char);
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                    self.pos += 1;
                    while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_digit()
                    {
                        fracpart.push(self.src[self.pos] as char);
                        self.pos += 1;
                    }
                }
                if intpart.is_empty() && fracpart.is_empty() {
                    return err(start, "expected digits");
                }
                // scientific suffix only when unambiguously numeric: e[+-]?digits
                if self.pos < self.src.len()
                    && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
                {
                    let mut look = self.pos + 1;
                    let mut sign: i64 = 1;
                    if look < self.src.len() && (self.src[look] == b'+' || self.src[look] == b'-') {
                        if self.src[look] == b'-' {
                            sign = -1;
                        }
                        look += 1;
                    }
                    let digits_start = look;
                    while look < self.src.len() && (self.src[look] as char).is_ascii_digit() {
                        look += 1;
                    }
                    if look > digits_start
                        && !(look < self.src.len()
                            && ((self.src[look] as char).is_ascii_alphanumeric()
                                || self.src[look] == b'_'))
                    {
                        let digits = std::str::from_utf8(&self.src[digits_start..look]).unwrap();
                        exppart = sign
                            * digits
                                .parse::<i64>()
                                .map_err(|_| ParseError {
                                    position: digits_start,
                                    message: "exponent overflow".into(),
                                })?;
                        self.pos = look;
                    }
                }
                let digits = format!(
                    "{}{}",
                    if intpart.is_empty() { "0" } else { &intpart },
                    fracpart
                );
                let numer: BigInt = digits.parse().map_err(|_| ParseError {
                    position: start,
                    message: "bad number".into(),
                })?;
                let mut q = Q::from_integer(numer);
                let shift = fracpart.len() as i64 - exppart;
                let ten = BigInt::from(10);
                if shift > 0 {
                    q /= Q::from_integer(ten.pow(shift as u32));
                } else if shift < 0 {
                    q *= Q::from_integer(ten.pow((-shift) as u32));
                }
                Tok::Num(q)
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut name = String::new();
                while self.pos < self.src.len() {
                    let ch = self.src[self.pos] as char;
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        name.push(ch);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                Tok::Ident(name)
            }
            _ => return err(start, format!("unexpected character `{}`", c)),
        };
        Ok(Some((start, tok)))
    }
}

pub(crate) fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    while let Some(t) = lx.next_tok()? {
        out.push(t);
    }
    Ok(out)
}

pub(crate) struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
    strict: Option<&'a BTreeSet<String>>,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str, strict: Option<&'a BTreeSet<String>>) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            idx: 0,
            end: src.len(),
            strict,
        })
    }

    pub(crate) fn at_end(&self) -> bool {
        self.idx == self.toks.len()
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    pub(crate) fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.end)
    }

    pub(crate) fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    pub(crate) fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(t) {
            self.idx += 1;
            Ok(())
        } else {
            err(self.pos(), format!("expected {}", what))
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.idx += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.idx += 1;
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.idx += 1;
                    acc = Expr::product(vec![acc, self.unary()?]);
                }
                Some(Tok::Slash) => {
                    self.idx += 1;
                    acc = Expr::div(acc, self.unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    pub(crate) fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.idx += 1;
            return Ok(Expr::neg(self.unary()?));
        }
        if self.peek() == Some(&Tok::Plus) {
            self.idx += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.idx += 1;
            let e = self.unary()?;
            return Ok(Expr::pow(base, e));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.idx += 1;
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            match self.bump() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                _ => return err(self.pos(), "expected `,` or `)`"),
            }
        }
        Ok(out)
    }

    fn check_known(&self, pos: usize, name: &str) -> Result<(), ParseError> {
        if let Some(known) = self.strict {
            if !known.contains(name) {
                return err(pos, format!("unknown identifier `{}`", name));
            }
        }
        Ok(())
    }

    pub(crate) fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(q)) => Ok(Expr::from_q(q)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.after_ident(pos, name),
            Some(t) => err(pos, format!("unexpected token {:?}", t)),
            None => err(pos, "unexpected end of input"),
        }
    }

    fn after_ident(&mut self, pos: usize, name: String) -> Result<Expr, ParseError> {
        let applied = matches!(self.peek(), Some(Tok::LParen) | Some(Tok::Primes(_)));
        if !applied {
            self.check_known(pos, &name)?;
            return Ok(Expr::var(name));
        }
        if name == "d" {
            return err(pos, "differential `d(...)` is only valid in form expressions");
        }
        if name == "int" {
            self.expect(&Tok::LParen, "`(`")?;
            let lo = self.expr()?;
            self.expect(&Tok::Comma, "`,`")?;
            let hi = self.expr()?;
            self.expect(&Tok::Comma, "`,`")?;
            let body = self.expr()?;
            self.expect(&Tok::Comma, "`,`")?;
            let dpos = self.pos();
            let dummy = match self.bump() {
                Some(Tok::Ident(d)) => d,
                _ => return err(dpos, "expected dummy variable name"),
            };
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(Expr::integral(lo, hi, body, dummy));
        }
        if name == "pd" {
            self.expect(&Tok::LParen, "`(`")?;
            let fpos = self.pos();
            let fname = match self.bump() {
                Some(Tok::Ident(f)) => f,
                _ => return err(fpos, "expected function name in pd(...)"),
            };
            let mut orders = Vec::new();
            while self.peek() == Some(&Tok::Comma) {
                self.idx += 1;
                let opos = self.pos();
                match self.bump() {
                    Some(Tok::Num(q)) if q.is_integer() => {
                        orders.push(u32::try_from(q.numer().clone()).map_err(|_| ParseError {
                            position: opos,
                            message: "derivative order too large".into(),
                        })?);
                    }
                    _ => return err(opos, "expected integer derivative order"),
                }
            }
            self.expect(&Tok::RParen, "`)`")?;
            let args = self.args()?;
            if args.len() != orders.len() {
                return err(
                    pos,
                    format!(
                        "pd({},...) lists {} orders but is applied to {} arguments",
                        fname,
                        orders.len(),
                        args.len()
                    ),
                );
            }
            return Ok(Expr::opaque_deriv(fname, orders, args));
        }
        let elem = match name.as_str() {
            "exp" => Some(super::ElemFn::Exp),
            "log" => Some(super::ElemFn::Log),
            "sin" => Some(super::ElemFn::Sin),
            "cos" => Some(super::ElemFn::Cos),
            "sqrt" => Some(super::ElemFn::Sqrt),
            _ => None,
        };
        let mut primes = 0usize;
        if let Some(Tok::Primes(n)) = self.peek() {
            primes = *n;
            self.idx += 1;
        }
        if let Some(f) = elem {
            if primes > 0 {
                return err(pos, "derivative markers apply to opaque functions only");
            }
            let mut a = self.args()?;
            if a.len() != 1 {
                return err(pos, format!("{} takes one argument", name));
            }
            return Ok(Expr::elem(f, a.pop().unwrap()));
        }
        let args = self.args()?;
        if primes > 0 && args.len() != 1 {
            return err(pos, "prime derivative markers require a single argument");
        }
        let orders = if args.len() == 1 {
            vec![primes as u32]
        } else {
            vec![0; args.len()]
        };
        Ok(Expr::opaque_deriv(name, orders, args))
    }
}

fn parse_with(src: &str, strict: Option<&BTreeSet<String>>) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, strict)?;
    let e = p.expr()?;
    if p.peek() == Some(&Tok::Wedge) {
        return err(p.pos(), "wedge `/\\` is only valid in form expressions");
    }
    if p.idx != p.toks.len() {
        return err(p.pos(), "trailing input");
    }
    Ok(e)
}

/// Parses a scalar expression. Unknown identifiers become variables (bare) or
/// opaque functions (applied).
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parse_with(src, None)
}

/// Parses a scalar expression, rejecting bare identifiers not in `known`.
/// Applied identifiers like `f(x)` always stay opaque function symbols: a
/// mistyped variable silently changes derivatives, a mistyped function
/// cannot.
pub fn parse_strict(src: &str, known: &BTreeSet<String>) -> Result<Expr, ParseError> {
    parse_with(src, Some(known))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::Node;

    #[test]
    fn quotient_over_product() {
        let e = parse("u_x*u_y/(u-x)").unwrap();
        assert_eq!(format!("{}", e), "u_x*u_y/(u - x)");
    }

    #[test]
    fn exp_of_integral() {
        let e = parse("exp(int(0,x,G(t),t))").unwrap();
        match e.node() {
            Node::Elem(super::super::ElemFn::Exp, inner) => {
                assert!(matches!(inner.node(), Node::Integral { .. }));
            }
            _ => panic!("expected exp node"),
        }
    }

    #[test]
    fn differential_rejected_in_scalar_context() {
        let e = parse("d(u)");
        assert!(e.is_err());
        assert!(e.unwrap_err().message.contains("form expressions"));
    }

    #[test]
    fn wedge_rejected_in_scalar_context() {
        let e = parse(r"x /\ y");
        assert!(e.is_err());
        assert!(e.unwrap_err().message.contains("form expressions"));
    }

    #[test]
    fn primes_and_pd() {
        let e = parse("f''(x) + g'(y)").unwrap();
        assert_eq!(format!("{}", e), "f''(x) + g'(y)");
        let e = parse("pd(a,1,0)(x, y)").unwrap();
        assert_eq!(format!("{}", e), "pd(a,1,0)(x, y)");
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse("-x^2").unwrap();
        assert_eq!(format!("{}", e), "-x^2");
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.as_i64(), Some(512));
        let e = parse("1 - 2*x").unwrap();
        assert_eq!(format!("{}", e), "-2*x + 1");
    }

    #[test]
    fn decimals_are_exact() {
        let e = parse("0.1").unwrap();
        assert_eq!(e.as_rational().unwrap(), &Q::new(1.into(), 10.into()));
        let e = parse("1.5e-3").unwrap();
        assert_eq!(e.as_rational().unwrap(), &Q::new(3.into(), 2000.into()));
    }

    #[test]
    fn strict_mode() {
        let known: std::collections::BTreeSet<String> =
            ["x".to_string(), "f".to_string()].into_iter().collect();
        assert!(parse_strict("f(x) + x", &known).is_ok());
        assert!(parse_strict("f(x) + y", &known).is_err());
    }

    #[test]
    fn roundtrip_print_parse() {
        for src in [
            "u_x*u_y/(u - x)",
            "exp(int(0, x, G(t), t))",
            "f''(x)*g(y) - 3/4",
            "x^(1/2) + sqrt(y)",
            "int(x, y, exp(int(0, s, G(t), t)), s)",
            "-2*x + 1",
            "(u - x)^2/v_x",
        ] {
            let e = parse(src).unwrap();
            let printed = format!("{}", e);
            let e2 = parse(&printed).unwrap();
            assert_eq!(e, e2, "unstable roundtrip: {} -> {}", src, printed);
        }
    }
}
