//! Symbolic expression kernel: immutable expression trees with exact rational
//! constants, opaque function symbols carrying derivative multi-indices, and
//! first-class definite-integral nodes. Provides parsing, differentiation,
//! substitution, canonical simplification, and numeric evaluation with
//! adaptive quadrature.

mod diff;
mod eval;
pub(crate) mod nf;
pub(crate) mod parse;
mod quad;
mod subst;
mod symint;

pub use diff::{derivative_along, differentiate, directional_derivative};
pub use eval::{eval_numeric, Binding, EvalError, Evaluator, FuncImpl};
pub use nf::{simplify, split_fraction, zero_probe, ProbeOptions};
pub use parse::{parse, parse_strict, ParseError};
pub use subst::{substitute, FuncDef, Substitution};
pub use symint::integrate_symbolic;

use num::BigRational;
use num::{BigInt, One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub type Q = BigRational;

/// Float literal wrapper with total ordering so expression trees stay `Ord`.
#[derive(Clone, Copy, Debug)]
pub struct F64(pub f64);

impl PartialEq for F64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for F64 {}
impl PartialOrd for F64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for F64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl std::hash::Hash for F64 {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

/// Elementary function heads understood by the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElemFn {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl ElemFn {
    pub fn name(self) -> &'static str {
        match self {
            ElemFn::Exp => "exp",
            ElemFn::Log => "log",
            ElemFn::Sin => "sin",
            ElemFn::Cos => "cos",
            ElemFn::Sqrt => "sqrt",
        }
    }
}

/// Expression node. `Expr` wraps this in an `Arc`; construction goes through
/// the smart constructors on `Expr`, which keep a few cheap invariants
/// (flattened sums/products, folded rational constants).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Rat(Q),
    Float(F64),
    Var(String),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Expr),
    Elem(ElemFn, Expr),
    /// Opaque function application `f(args)` differentiated `orders[i]` times
    /// in its i-th argument. `orders.len() == args.len()`.
    Opaque {
        name: String,
        orders: Vec<u32>,
        args: Vec<Expr>,
    },
    /// Definite integral of `body` in the bound variable `dummy` from `lo` to `hi`.
    Integral {
        lo: Expr,
        hi: Expr,
        body: Expr,
        dummy: String,
    },
}

/// Immutable, cheaply cloneable symbolic expression.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

/// A named opaque function: arity, optional smoothness bound, and how often it
/// may be differentiated symbolically. Bindings attach implementations later.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncSymbol {
    pub name: String,
    pub arity: usize,
    /// Highest total derivative order representable; `None` means smooth.
    pub smoothness: Option<u32>,
}

impl FuncSymbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        FuncSymbol {
            name: name.into(),
            arity,
            smoothness: None,
        }
    }

    pub fn apply(&self, args: Vec<Expr>) -> Expr {
        assert_eq!(args.len(), self.arity, "arity mismatch for {}", self.name);
        Expr::opaque(&self.name, args)
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn new(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    // ---- constant constructors ----

    pub fn int(n: i64) -> Expr {
        Expr::from_q(Q::from_integer(BigInt::from(n)))
    }

    pub fn rat(num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero denominator");
        Expr::from_q(Q::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_q(q: Q) -> Expr {
        Expr::new(Node::Rat(q))
    }

    pub fn float(f: f64) -> Expr {
        Expr::new(Node::Float(F64(f)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(Node::Var(name.into()))
    }

    // ---- structural queries ----

    pub fn as_rational(&self) -> Option<&Q> {
        match self.node() {
            Node::Rat(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        let q = self.as_rational()?;
        if !q.is_integer() {
            return None;
        }
        i64::try_from(q.numer().clone()).ok()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Rat(q) if q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Rat(q) if q.is_one())
    }

    /// Free variables, excluding integral dummies bound inside.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Rat(_) | Node::Float(_) => {}
            Node::Var(v) => {
                if !bound.iter().any(|b| b == v) {
                    out.insert(v.clone());
                }
            }
            Node::Add(xs) | Node::Mul(xs) => {
                for x in xs {
                    x.collect_free(bound, out);
                }
            }
            Node::Pow(b, e) => {
                b.collect_free(bound, out);
                e.collect_free(bound, out);
            }
            Node::Elem(_, a) => a.collect_free(bound, out),
            Node::Opaque { args, .. } => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            Node::Integral { lo, hi, body, dummy } => {
                lo.collect_free(bound, out);
                hi.collect_free(bound, out);
                bound.push(dummy.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        self.free_vars().contains(var)
    }

    /// Opaque function names appearing anywhere in the tree.
    pub fn opaque_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            if let Node::Opaque { name, .. } = n {
                out.insert(name.clone());
            }
        });
        out
    }

    pub(crate) fn walk(&self, f: &mut impl FnMut(&Node)) {
        f(self.node());
        match self.node() {
            Node::Rat(_) | Node::Float(_) | Node::Var(_) => {}
            Node::Add(xs) | Node::Mul(xs) => {
                for x in xs {
                    x.walk(f);
                }
            }
            Node::Pow(b, e) => {
                b.walk(f);
                e.walk(f);
            }
            Node::Elem(_, a) => a.walk(f),
            Node::Opaque { args, .. } => {
                for a in args {
                    a.walk(f);
                }
            }
            Node::Integral { lo, hi, body, .. } => {
                lo.walk(f);
                hi.walk(f);
                body.walk(f);
            }
        }
    }

    // ---- smart constructors ----

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::with_capacity(terms.len());
        let mut c = Q::zero();
        for t in terms {
            match t.node() {
                Node::Add(xs) => {
                    for x in xs {
                        match x.node() {
                            Node::Rat(q) => c += q,
                            _ => flat.push(x.clone()),
                        }
                    }
                }
                Node::Rat(q) => c += q,
                _ => flat.push(t),
            }
        }
        if !c.is_zero() || flat.is_empty() {
            flat.push(Expr::from_q(c));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Expr::new(Node::Add(flat))
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::with_capacity(factors.len());
        let mut c = Q::one();
        for t in factors {
            match t.node() {
                Node::Mul(xs) => {
                    for x in xs {
                        match x.node() {
                            Node::Rat(q) => c *= q,
                            _ => flat.push(x.clone()),
                        }
                    }
                }
                Node::Rat(q) => c *= q,
                _ => flat.push(t),
            }
        }
        if c.is_zero() {
            return Expr::zero();
        }
        if !c.is_one() || flat.is_empty() {
            flat.insert(0, Expr::from_q(c));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Expr::new(Node::Mul(flat))
        }
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::product(vec![Expr::int(-1), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::sum(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::product(vec![a, Expr::pow(b, Expr::int(-1))])
    }

    pub fn pow(base: Expr, expo: Expr) -> Expr {
        if let Some(e) = expo.as_rational() {
            if e.is_zero() {
                return Expr::one();
            }
            if e.is_one() {
                return base;
            }
            if let Some(b) = base.as_rational() {
                if e.is_integer() {
                    if let Ok(k) = i32::try_from(e.numer().clone()) {
                        if b.is_zero() && k < 0 {
                            // leave 0^negative unfolded; evaluation reports it
                        } else {
                            return Expr::from_q(pow_q(b, k));
                        }
                    }
                }
            }
        }
        Expr::new(Node::Pow(base, expo))
    }

    pub fn powi(base: Expr, k: i64) -> Expr {
        Expr::pow(base, Expr::int(k))
    }

    pub fn elem(f: ElemFn, a: Expr) -> Expr {
        if let Some(q) = a.as_rational() {
            match f {
                ElemFn::Exp if q.is_zero() => return Expr::one(),
                ElemFn::Log if q.is_one() => return Expr::zero(),
                ElemFn::Sin if q.is_zero() => return Expr::zero(),
                ElemFn::Cos if q.is_zero() => return Expr::one(),
                ElemFn::Sqrt => {
                    if q.is_zero() {
                        return Expr::zero();
                    }
                    if q.is_one() {
                        return Expr::one();
                    }
                }
                _ => {}
            }
        }
        Expr::new(Node::Elem(f, a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::elem(ElemFn::Exp, a)
    }
    pub fn log(a: Expr) -> Expr {
        Expr::elem(ElemFn::Log, a)
    }
    pub fn sin(a: Expr) -> Expr {
        Expr::elem(ElemFn::Sin, a)
    }
    pub fn cos(a: Expr) -> Expr {
        Expr::elem(ElemFn::Cos, a)
    }
    pub fn sqrt(a: Expr) -> Expr {
        Expr::elem(ElemFn::Sqrt, a)
    }

    pub fn opaque(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        let orders = vec![0; args.len()];
        Expr::new(Node::Opaque {
            name: name.into(),
            orders,
            args,
        })
    }

    pub fn opaque_deriv(name: impl Into<String>, orders: Vec<u32>, args: Vec<Expr>) -> Expr {
        assert_eq!(orders.len(), args.len(), "derivative multi-index length");
        Expr::new(Node::Opaque {
            name: name.into(),
            orders,
            args,
        })
    }

    pub fn integral(lo: Expr, hi: Expr, body: Expr, dummy: impl Into<String>) -> Expr {
        Expr::new(Node::Integral {
            lo,
            hi,
            body,
            dummy: dummy.into(),
        })
    }

    /// Convenience: `f(x)` for a unary opaque symbol.
    pub fn call1(name: &str, arg: Expr) -> Expr {
        Expr::opaque(name, vec![arg])
    }

    /// Convenience: k-th derivative of a unary opaque symbol.
    pub fn call1_deriv(name: &str, order: u32, arg: Expr) -> Expr {
        Expr::opaque_deriv(name, vec![order], vec![arg])
    }

    /// Structural-then-numeric equivalence: the canonical forms coincide.
    pub fn equivalent(&self, other: &Expr) -> bool {
        simplify(&Expr::sub(self.clone(), other.clone())).is_zero()
    }
}

pub(crate) fn pow_q(b: &Q, k: i32) -> Q {
    let mut r = Q::one();
    let mut base = if k < 0 { r.clone() / b } else { b.clone() };
    let mut n = k.unsigned_abs();
    while n > 0 {
        if n & 1 == 1 {
            r *= &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    r
}

pub(crate) fn q_to_f64(q: &Q) -> f64 {
    use num::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

// ---- operator overloading for readable construction ----

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }
}
impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// ---- printing ----

fn rat_is_negative(e: &Expr) -> bool {
    match e.node() {
        Node::Rat(q) => q.is_negative(),
        Node::Mul(xs) => xs.first().map_or(false, rat_is_negative),
        _ => false,
    }
}

/// Splits a product into (numerator factors, denominator factors), pulling
/// factors with negative rational exponents into the denominator.
fn split_quotient(factors: &[Expr]) -> (Vec<Expr>, Vec<Expr>) {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in factors {
        if let Node::Pow(b, e) = f.node() {
            if let Some(q) = e.as_rational() {
                if q.is_negative() {
                    let flipped = -q.clone();
                    if flipped.is_one() {
                        den.push(b.clone());
                    } else {
                        den.push(Expr::new(Node::Pow(b.clone(), Expr::from_q(flipped))));
                    }
                    continue;
                }
            }
        }
        num.push(f.clone());
    }
    (num, den)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_prec(self, 0))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// prec levels: 0 sum context, 1 product context, 2 unary-minus operand,
/// 3 power base.
fn print_prec(e: &Expr, prec: u8) -> String {
    let s = match e.node() {
        Node::Rat(q) => {
            if q.is_integer() {
                format!("{}", q.numer())
            } else {
                format!("{}/{}", q.numer(), q.denom())
            }
        }
        Node::Float(F64(x)) => {
            let mut s = format!("{}", x);
            if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
                s.push_str(".0");
            }
            s
        }
        Node::Var(v) => v.clone(),
        Node::Add(xs) => {
            let mut s = String::new();
            for (i, t) in xs.iter().enumerate() {
                if i == 0 {
                    s.push_str(&print_prec(t, 0));
                } else if rat_is_negative(t) {
                    s.push_str(" - ");
                    s.push_str(&print_prec(&Expr::neg(t.clone()), 1));
                } else {
                    s.push_str(" + ");
                    s.push_str(&print_prec(t, 1));
                }
            }
            s
        }
        Node::Mul(xs) => {
            let (mut num, den) = split_quotient(xs);
            let mut neg = false;
            if let Some(first) = num.first() {
                if let Node::Rat(q) = first.node() {
                    if q.is_negative() {
                        neg = true;
                        let flipped = Expr::from_q(-q.clone());
                        if flipped.is_one() && num.len() > 1 {
                            num.remove(0);
                        } else {
                            num[0] = flipped;
                        }
                    }
                }
            }
            if num.is_empty() {
                num.push(Expr::one());
            }
            let ns = num
                .iter()
                .map(|t| print_prec(t, 2))
                .collect::<Vec<_>>()
                .join("*");
            let body = if den.is_empty() {
                ns
            } else if den.len() == 1 {
                format!("{}/{}", ns, print_prec(&den[0], 3))
            } else {
                let ds = den
                    .iter()
                    .map(|t| print_prec(t, 2))
                    .collect::<Vec<_>>()
                    .join("*");
                format!("{}/({})", ns, ds)
            };
            if neg {
                format!("-{}", body)
            } else {
                body
            }
        }
        Node::Pow(b, e2) => {
            format!("{}^{}", print_prec(b, 3), print_prec(e2, 3))
        }
        Node::Elem(fun, a) => format!("{}({})", fun.name(), print_prec(a, 0)),
        Node::Opaque { name, orders, args } => {
            let head = if args.len() == 1 {
                let mut h = name.clone();
                for _ in 0..orders[0] {
                    h.push('\'');
                }
                h
            } else if orders.iter().all(|&o| o == 0) {
                name.clone()
            } else {
                let idx = orders
                    .iter()
                    .map(|o| o.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("pd({},{})", name, idx)
            };
            let a = args
                .iter()
                .map(|x| print_prec(x, 0))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{}({})", head, a)
        }
        Node::Integral { lo, hi, body, dummy } => format!(
            "int({}, {}, {}, {})",
            print_prec(lo, 0),
            print_prec(hi, 0),
            print_prec(body, 0),
            dummy
        ),
    };
    let my_prec = match e.node() {
        Node::Add(_) => 1u8,
        Node::Mul(_) => 2,
        Node::Pow(..) => 3,
        Node::Rat(q) => {
            if q.is_negative() || !q.is_integer() {
                2
            } else {
                4
            }
        }
        Node::Float(F64(x)) => {
            if *x < 0.0 {
                2
            } else {
                4
            }
        }
        _ => 4,
    };
    // negative leading coefficient makes a product bind like a unary minus
    let effective = if my_prec >= 2 && rat_is_negative(e) {
        1
    } else {
        my_prec
    };
    if effective < prec || (prec == 3 && my_prec == 3) {
        format!("({})", s)
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_fold_constants() {
        let e = Expr::sum(vec![Expr::int(2), Expr::int(3), Expr::var("x")]);
        assert_eq!(format!("{}", e), "x + 5");
        let p = Expr::product(vec![Expr::int(3), Expr::rat(1, 4)]);
        assert_eq!(p.as_rational().unwrap(), &Q::new(3.into(), 4.into()));
        assert!(Expr::product(vec![Expr::zero(), Expr::var("y")]).is_zero());
    }

    #[test]
    fn pow_folds_small_integers() {
        assert_eq!(Expr::powi(Expr::int(2), 10).as_i64(), Some(1024));
        assert_eq!(
            Expr::powi(Expr::rat(2, 3), -2).as_rational().unwrap(),
            &Q::new(9.into(), 4.into())
        );
    }

    #[test]
    fn free_vars_respect_binding() {
        let e = Expr::integral(
            Expr::zero(),
            Expr::var("x"),
            Expr::call1("G", Expr::var("t")),
            "t",
        );
        let fv = e.free_vars();
        assert!(fv.contains("x"));
        assert!(!fv.contains("t"));
    }

    #[test]
    fn display_quotients() {
        let e = Expr::div(
            Expr::product(vec![Expr::var("u_x"), Expr::var("u_y")]),
            Expr::sub(Expr::var("u"), Expr::var("x")),
        );
        assert_eq!(format!("{}", e), "u_x*u_y/(u - x)");
    }
}
