//! Parser for form expressions: the scalar grammar extended with the
//! differential `d(...)` and the wedge `/\`.
//!
//! Scalars and forms mix freely where meaningful: scalars multiply forms,
//! `d` of a scalar is its exterior derivative as a 1-form, `d` of a form is
//! its exterior derivative, and a wedge with a scalar operand treats the
//! scalar as a 0-form. Bare identifiers must be chart coordinates; applied
//! identifiers like `f(y)` stay opaque functions.

use super::form::d_scalar;
use super::{Chart, DifferentialForm, GeomError};
use crate::symcore::parse::{ParseError, Parser, Tok};
use crate::symcore::Expr;
use std::collections::BTreeSet;

enum Value {
    Scalar(Expr),
    Form(DifferentialForm),
}

impl Value {
    fn into_form(self, chart: &Chart) -> DifferentialForm {
        match self {
            Value::Scalar(e) => DifferentialForm::scalar(chart, e),
            Value::Form(f) => f,
        }
    }
}

struct FormParser<'a> {
    p: Parser<'a>,
    chart: &'a Chart,
    known: &'a BTreeSet<String>,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T, GeomError> {
    Err(GeomError::Parse(ParseError {
        position,
        message: message.into(),
    }))
}

impl<'a> FormParser<'a> {
    fn expr(&mut self) -> Result<Value, GeomError> {
        let mut acc = self.term()?;
        loop {
            let negate = match self.p.peek() {
                Some(Tok::Plus) => false,
                Some(Tok::Minus) => true,
                _ => break,
            };
            let at = self.p.pos();
            self.p.bump();
            let rhs = self.term()?;
            acc = self.combine_additive(acc, rhs, negate, at)?;
        }
        Ok(acc)
    }

    fn combine_additive(
        &self,
        lhs: Value,
        rhs: Value,
        negate: bool,
        at: usize,
    ) -> Result<Value, GeomError> {
        match (lhs, rhs) {
            (Value::Scalar(a), Value::Scalar(b)) => {
                Ok(Value::Scalar(if negate { a - b } else { a + b }))
            }
            (lhs, rhs) => {
                let a = lhs.into_form(self.chart);
                let b = rhs.into_form(self.chart);
                let b = if negate { b.neg() } else { b };
                match a.add(&b) {
                    Ok(f) => Ok(Value::Form(f)),
                    Err(GeomError::DegreeMismatch(p, q)) => err(
                        at,
                        format!("cannot add a {p}-form and a {q}-form"),
                    ),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn term(&mut self) -> Result<Value, GeomError> {
        let mut acc = self.unary()?;
        loop {
            let op = match self.p.peek() {
                Some(Tok::Star) => '*',
                Some(Tok::Slash) => '/',
                Some(Tok::Wedge) => 'w',
                _ => break,
            };
            let at = self.p.pos();
            self.p.bump();
            let rhs = self.unary()?;
            acc = match (op, acc, rhs) {
                ('*', Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a * b),
                ('*', Value::Scalar(s), Value::Form(f))
                | ('*', Value::Form(f), Value::Scalar(s)) => Value::Form(f.scale(&s)),
                ('*', Value::Form(_), Value::Form(_)) => {
                    return err(at, "use `/\\` to multiply differential forms")
                }
                ('/', Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(Expr::div(a, b)),
                ('/', Value::Form(f), Value::Scalar(s)) => {
                    Value::Form(f.scale(&Expr::div(Expr::one(), s)))
                }
                ('/', _, Value::Form(_)) => {
                    return err(at, "cannot divide by a differential form")
                }
                ('w', a, b) => {
                    let a = a.into_form(self.chart);
                    let b = b.into_form(self.chart);
                    Value::Form(a.wedge(&b)?)
                }
                _ => unreachable!(),
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Value, GeomError> {
        match self.p.peek() {
            Some(Tok::Minus) => {
                self.p.bump();
                Ok(match self.unary()? {
                    Value::Scalar(e) => Value::Scalar(Expr::neg(e)),
                    Value::Form(f) => Value::Form(f.neg()),
                })
            }
            Some(Tok::Plus) => {
                self.p.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Value, GeomError> {
        let base = self.atom()?;
        if self.p.peek() == Some(&Tok::Caret) {
            let at = self.p.pos();
            self.p.bump();
            let expo = self.unary()?;
            let (Value::Scalar(b), Value::Scalar(e)) = (base, expo) else {
                return err(at, "`^` applies to scalars only");
            };
            return Ok(Value::Scalar(Expr::pow(b, e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Value, GeomError> {
        match self.p.peek() {
            Some(Tok::LParen) => {
                self.p.bump();
                let v = self.expr()?;
                let at = self.p.pos();
                if self.p.bump() != Some(Tok::RParen) {
                    return err(at, "expected `)`");
                }
                Ok(v)
            }
            Some(Tok::Ident(name)) if name == "d" => {
                let at = self.p.pos();
                self.p.bump();
                if self.p.peek() != Some(&Tok::LParen) {
                    // a chart may name a coordinate `d`; only `d(` is special
                    if self.known.contains("d") {
                        return Ok(Value::Scalar(Expr::var("d")));
                    }
                    return err(at, "expected `(` after differential `d`");
                }
                self.p.bump();
                let inner = self.expr()?;
                let at = self.p.pos();
                if self.p.bump() != Some(Tok::RParen) {
                    return err(at, "expected `)`");
                }
                Ok(Value::Form(match inner {
                    Value::Scalar(e) => d_scalar(self.chart, &e),
                    Value::Form(f) => f.exterior_derivative(),
                }))
            }
            _ => Ok(Value::Scalar(self.p.atom()?)),
        }
    }
}

/// Parses a form expression on the chart. A purely scalar result is returned
/// as a 0-form.
pub fn parse_form(chart: &Chart, src: &str) -> Result<DifferentialForm, GeomError> {
    let known = chart.coord_set();
    let p = Parser::new(src, Some(&known)).map_err(GeomError::Parse)?;
    let mut fp = FormParser {
        p,
        chart,
        known: &known,
    };
    let v = fp.expr()?;
    if !fp.p.at_end() {
        return err(fp.p.pos(), "trailing input");
    }
    Ok(v.into_form(chart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse;

    fn jet1() -> Chart {
        Chart::new(&["x", "y", "u", "u_x", "u_y"]).unwrap()
    }

    #[test]
    fn contact_form_parses() {
        let m = jet1();
        let theta = parse_form(&m, "d(u) - u_x*d(x) - u_y*d(y)").unwrap();
        assert_eq!(theta.degree(), 1);
        assert!(theta.coefficient(&["u"]).unwrap().is_one());
        let cx = theta.coefficient(&["x"]).unwrap();
        assert!(crate::symcore::simplify(&(cx + parse("u_x").unwrap())).is_zero());
    }

    #[test]
    fn wedge_and_scalars_mix() {
        let m = jet1();
        let a = parse_form(&m, "d(x) /\\ d(u_x)").unwrap();
        assert_eq!(a.degree(), 2);
        let b = parse_form(&m, "(u - x)*d(x)/\\d(y) - d(y)/\\d(x)*u").unwrap();
        // second term rewrites to +u d(x)/\d(y)
        let c = b.coefficient(&["x", "y"]).unwrap();
        let want = parse("2*u - x").unwrap();
        assert!(crate::symcore::simplify(&(c - want)).is_zero());
    }

    #[test]
    fn differential_of_product_expands() {
        let m = jet1();
        let got = parse_form(&m, "d(x*u)").unwrap();
        let want = parse_form(&m, "u*d(x) + x*d(u)").unwrap();
        assert!(got.same(&want));
    }

    #[test]
    fn d_of_form_is_exterior_derivative() {
        let m = jet1();
        let got = parse_form(&m, "d(u*d(x))").unwrap();
        let want = parse_form(&m, "d(u)/\\d(x)").unwrap();
        assert!(got.same(&want));
    }

    #[test]
    fn mixed_degree_sum_is_rejected() {
        let m = jet1();
        let e = parse_form(&m, "d(x) + d(x)/\\d(y)");
        assert!(e.is_err());
        let e = parse_form(&m, "x + d(x)");
        assert!(e.is_err());
    }

    #[test]
    fn scalar_only_input_becomes_zero_form() {
        let m = jet1();
        let f = parse_form(&m, "u^2 - x*y").unwrap();
        assert_eq!(f.degree(), 0);
        let s = f.as_scalar().unwrap();
        assert!(crate::symcore::simplify(&(s - parse("u^2 - x*y").unwrap())).is_zero());
    }

    #[test]
    fn unknown_bare_identifier_is_rejected() {
        let m = jet1();
        assert!(parse_form(&m, "w*d(x)").is_err());
        // applied identifiers stay opaque functions
        assert!(parse_form(&m, "f(y)*d(x)").is_ok());
    }

    #[test]
    fn division_by_form_is_rejected() {
        let m = jet1();
        assert!(parse_form(&m, "x / d(x)").is_err());
        assert!(parse_form(&m, "d(x) / u").is_ok());
    }
}
