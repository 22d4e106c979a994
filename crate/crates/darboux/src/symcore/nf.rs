//! Canonical normal form for scalar expressions.
//!
//! An expression is flattened into a quotient of multivariate polynomials
//! whose "variables" are atoms: chart variables, opaque function symbols
//! applied to canonical arguments, logarithms, sines and cosines,
//! definite integrals based at zero, and fractional powers. Each monomial
//! additionally carries a single exponential factor exp(S) whose argument
//! S is itself a normal form, so products of exponentials combine by
//! adding arguments and quotients cancel them.
//!
//! The form is canonical up to polynomial gcd: common monomial factors,
//! common exponential factors, and constant scale are removed from a
//! quotient, but (x^2-1)/(x-1) is not divided out. Equality of normal
//! forms is therefore a sound but incomplete zero test; `zero_probe`
//! complements it numerically.
//!
//! Power-combination rules treat symbols as ranging over the domain where
//! the original expression is defined (so log(exp(S)) = S, and exponents
//! combine multiplicatively), matching the open chart conventions used
//! throughout the crate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::{eval_numeric, Binding};
use super::subst::{substitute, FuncDef, Substitution};
use super::{pow_q, ElemFn, Expr, Node, Q};

/// Prefix for canonical integration dummies; the non-ASCII marker cannot
/// collide with identifiers produced by the parser.
pub(crate) const DUMMY_MARK: &str = "\u{3be}#";

fn dummy_depth(name: &str) -> Option<u32> {
    name.strip_prefix(DUMMY_MARK)?.parse().ok()
}

/// Exact r-th root of a rational, if one exists.
fn exact_root(c: &Q, r: u32) -> Option<Q> {
    if c.is_negative() && r % 2 == 0 {
        return None;
    }
    let root_of = |x: &BigInt| -> Option<BigInt> {
        let mag = x.abs();
        let root = mag.nth_root(r);
        if num::pow::pow(root.clone(), r as usize) == mag {
            Some(if x.is_negative() { -root } else { root })
        } else {
            None
        }
    };
    let n = root_of(c.numer())?;
    let d = root_of(c.denom())?;
    Some(Q::new(n, d))
}

/// Exact value of c^f for fractional f = p/r in (0,1), if rational.
fn exact_frac_pow(c: &Q, f: &Q) -> Option<Q> {
    let p = f.numer().to_i32()?;
    let r = f.denom().to_u32()?;
    exact_root(&pow_q(c, p), r)
}

fn big_int_pow(c: &Q, n: &BigInt) -> Q {
    let k = n.to_i32().expect("integer exponent out of range");
    pow_q(c, k)
}

// ---------------------------------------------------------------------
// data model
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Atom {
    Var(String),
    Opaque {
        name: String,
        orders: Vec<u32>,
        args: Vec<Nf>,
    },
    Log(Nf),
    Sin(Nf),
    Cos(Nf),
    /// Definite integral from 0 to `upper` of `body`; the bound variable
    /// appears in `body` as the canonical dummy of index `depth`.
    Int {
        upper: Nf,
        body: Nf,
        depth: u32,
    },
    /// Non-monomial or irrational-constant base raised to a fractional
    /// exponent in (0,1). Monomial bases distribute onto their atoms
    /// instead.
    FracPow {
        base: Poly,
        expo: Q,
    },
    /// Base raised to a non-constant exponent.
    Pow {
        base: Nf,
        expo: Nf,
    },
}

/// Product of atoms with positive rational exponents times at most one
/// exponential factor exp(arg). `exparg == None` means no such factor.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Mono {
    pows: BTreeMap<Atom, Q>,
    exparg: Option<Box<Nf>>,
}

impl Mono {
    fn unit() -> Self {
        Mono::default()
    }

    fn is_unit(&self) -> bool {
        self.pows.is_empty() && self.exparg.is_none()
    }

    fn from_atom(a: Atom) -> Self {
        let mut pows = BTreeMap::new();
        pows.insert(a, Q::one());
        Mono { pows, exparg: None }
    }
}

fn opt_exparg(nf: Nf) -> Option<Box<Nf>> {
    if nf.is_zero() {
        None
    } else {
        Some(Box::new(nf))
    }
}

/// Sum of coefficient-weighted monomials; the empty map is zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Poly(BTreeMap<Mono, Q>);

impl Poly {
    fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    fn one() -> Self {
        Poly::constant(Q::one())
    }

    fn constant(q: Q) -> Self {
        let mut m = BTreeMap::new();
        if !q.is_zero() {
            m.insert(Mono::unit(), q);
        }
        Poly(m)
    }

    fn from_mono(m: Mono, c: Q) -> Self {
        let mut map = BTreeMap::new();
        if !c.is_zero() {
            map.insert(m, c);
        }
        Poly(map)
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn is_one(&self) -> bool {
        self.as_const().map_or(false, |c| c.is_one())
    }

    fn as_const(&self) -> Option<Q> {
        if self.0.is_empty() {
            return Some(Q::zero());
        }
        if self.0.len() == 1 {
            let (m, c) = self.0.iter().next().unwrap();
            if m.is_unit() {
                return Some(c.clone());
            }
        }
        None
    }

    fn single_mono(&self) -> Option<(&Mono, &Q)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut out = self.0.clone();
        for (m, c) in &o.0 {
            let e = out.entry(m.clone()).or_insert_with(Q::zero);
            *e += c;
            if e.is_zero() {
                out.remove(m);
            }
        }
        Poly(out)
    }

    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    fn scale(&self, q: &Q) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * q)).collect())
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &o.0 {
                let (m, cf, lefts) = mono_mul(ma, mb);
                let mut piece = Poly::from_mono(m, ca * cb * cf);
                for (p, n) in lefts {
                    piece = piece.mul(&p.pow_usize(n));
                }
                acc = acc.add(&piece);
            }
        }
        acc
    }

    fn pow_usize(&self, n: u64) -> Poly {
        let mut base = self.clone();
        let mut n = n;
        let mut acc = Poly::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn pow_big(&self, n: &BigInt) -> Poly {
        self.pow_usize(n.to_u64().expect("polynomial exponent out of range"))
    }

    fn leading(&self) -> Option<(&Mono, &Q)> {
        self.0.iter().next_back()
    }

    /// Leading term under the graded-lexicographic order of [`mono_cmp`].
    fn grlex_leading(&self) -> Option<(&Mono, &Q)> {
        self.0.iter().max_by(|(a, _), (b, _)| mono_cmp(a, b))
    }

    /// Exact quotient self/d, or None when d does not divide self (or the
    /// division does not complete within the step budget). Soundness does
    /// not depend on the term order: each step preserves
    /// self = quot*d + rem, so a zero remainder certifies the quotient.
    fn try_div_exact(&self, d: &Poly) -> Option<Poly> {
        let (ld_m, ld_c) = d.grlex_leading()?;
        let (ld_m, ld_c) = (ld_m.clone(), ld_c.clone());
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        for _ in 0..4096 {
            if rem.is_zero() {
                return Some(quot);
            }
            let (lr_m, lr_c) = rem.grlex_leading().expect("nonzero polynomial has a leading term");
            let t = Poly::from_mono(mono_try_div(lr_m, &ld_m)?, lr_c / &ld_c);
            quot = quot.add(&t);
            rem = rem.add(&t.mul(d).neg());
        }
        None
    }

    /// Atom exponents common to every monomial.
    fn content_pows(&self) -> BTreeMap<Atom, Q> {
        let mut it = self.0.keys();
        let mut common: BTreeMap<Atom, Q> = match it.next() {
            Some(m) => m.pows.clone(),
            None => return BTreeMap::new(),
        };
        for m in it {
            common.retain(|a, k| {
                if let Some(k2) = m.pows.get(a) {
                    if k2 < k {
                        *k = k2.clone();
                    }
                    true
                } else {
                    false
                }
            });
            if common.is_empty() {
                break;
            }
        }
        common
    }

    /// Positive gcd of the absolute values of the coefficients.
    fn content_coeff(&self) -> Q {
        let mut n = BigInt::zero();
        let mut d = BigInt::one();
        for c in self.0.values() {
            n = num::integer::gcd(n, c.numer().abs());
            d = num::integer::lcm(d, c.denom().clone());
        }
        if n.is_zero() {
            Q::one()
        } else {
            Q::new(n, d)
        }
    }

    fn div_pows(&self, pows: &BTreeMap<Atom, Q>) -> Poly {
        let mut out = BTreeMap::new();
        for (m, c) in &self.0 {
            let mut np = m.pows.clone();
            for (a, k) in pows {
                let e = np.get_mut(a).expect("content division mismatch");
                *e -= k;
                if e.is_zero() {
                    np.remove(a);
                }
            }
            out.insert(
                Mono {
                    pows: np,
                    exparg: m.exparg.clone(),
                },
                c.clone(),
            );
        }
        Poly(out)
    }

    /// The exponential argument shared by every monomial, if uniform and
    /// nonzero.
    fn common_exparg(&self) -> Option<Nf> {
        let mut it = self.0.keys();
        let first = it.next()?.exparg.clone()?;
        for m in it {
            if m.exparg.as_deref() != Some(&first) {
                return None;
            }
        }
        Some(*first)
    }

    fn sub_exparg(&self, e: &Nf) -> Poly {
        let mut out = BTreeMap::new();
        for (m, c) in &self.0 {
            let cur = m.exparg.as_deref().cloned().unwrap_or_else(Nf::zero);
            let m2 = Mono {
                pows: m.pows.clone(),
                exparg: opt_exparg(cur.sub(e)),
            };
            out.insert(m2, c.clone());
        }
        Poly(out)
    }
}

/// Canonical quotient of polynomials. Invariants: the denominator is
/// nonzero with leading coefficient one; numerator and denominator share
/// no monomial content and no uniform exponential factor; zero is 0/1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Nf {
    num: Poly,
    den: Poly,
}

impl Nf {
    pub(crate) fn zero() -> Self {
        Nf {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    fn one() -> Self {
        Nf::constant(Q::one())
    }

    fn constant(q: Q) -> Self {
        Nf {
            num: Poly::constant(q),
            den: Poly::one(),
        }
    }

    fn from_poly(p: Poly) -> Self {
        Nf {
            num: p,
            den: Poly::one(),
        }
    }

    fn from_atom(a: Atom) -> Self {
        Nf::from_poly(Poly::from_mono(Mono::from_atom(a), Q::one()))
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    fn as_rational(&self) -> Option<Q> {
        if self.den.is_one() {
            self.num.as_const()
        } else {
            None
        }
    }

    fn reduced(num: Poly, den: Poly) -> Nf {
        assert!(!den.is_zero(), "denominator vanished in normal form");
        if num.is_zero() {
            return Nf::zero();
        }
        let mut num = num;
        let mut den = den;
        // common monomial content
        let mut common = num.content_pows();
        if !common.is_empty() {
            let dc = den.content_pows();
            common.retain(|a, k| {
                if let Some(k2) = dc.get(a) {
                    if k2 < k {
                        *k = k2.clone();
                    }
                    true
                } else {
                    false
                }
            });
            if !common.is_empty() {
                num = num.div_pows(&common);
                den = den.div_pows(&common);
            }
        }
        // uniform exponential factor of the denominator
        if let Some(e) = den.common_exparg() {
            num = num.sub_exparg(&e);
            den = den.sub_exparg(&e);
        }
        // cancel a full polynomial factor when one side divides the other
        if den.as_const().is_none() {
            if let Some(q) = num.try_div_exact(&den) {
                num = q;
                den = Poly::one();
            } else if num.as_const().is_none() {
                if let Some(q) = den.try_div_exact(&num) {
                    den = q;
                    num = Poly::one();
                }
            }
        }
        // unit leading coefficient of the denominator
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        if !lc.is_one() {
            let inv = Q::one() / lc;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        if num == den {
            return Nf::one();
        }
        if num == den.neg() {
            return Nf::constant(-Q::one());
        }
        Nf { num, den }
    }

    fn add(&self, o: &Nf) -> Nf {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            Nf::reduced(self.num.add(&o.num), self.den.clone())
        } else {
            Nf::reduced(
                self.num.mul(&o.den).add(&o.num.mul(&self.den)),
                self.den.mul(&o.den),
            )
        }
    }

    fn neg(&self) -> Nf {
        Nf {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    fn sub(&self, o: &Nf) -> Nf {
        self.add(&o.neg())
    }

    fn mul(&self, o: &Nf) -> Nf {
        if self.is_zero() || o.is_zero() {
            return Nf::zero();
        }
        Nf::reduced(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    fn scale(&self, q: &Q) -> Nf {
        if q.is_zero() {
            return Nf::zero();
        }
        Nf {
            num: self.num.scale(q),
            den: self.den.clone(),
        }
    }

    fn inv(&self) -> Nf {
        if self.is_zero() {
            // Division by a structural zero is kept symbolic; evaluation
            // reports it as a domain error.
            return Nf::from_atom(Atom::Pow {
                base: Nf::zero(),
                expo: Nf::constant(-Q::one()),
            });
        }
        Nf::reduced(self.den.clone(), self.num.clone())
    }
}

// ---------------------------------------------------------------------
// monomial multiplication and exponent bookkeeping
// ---------------------------------------------------------------------

/// Rebuilds a monomial after exponent arithmetic: fractional powers with
/// equal bases combine, integer parts move into the coefficient or into
/// polynomial cofactors, and symbolic powers re-key on their total
/// exponent.
fn normalize_mono(
    pows: BTreeMap<Atom, Q>,
    exparg: Option<Box<Nf>>,
) -> (Mono, Q, Vec<(Poly, u64)>) {
    let mut out: BTreeMap<Atom, Q> = BTreeMap::new();
    let mut coeff = Q::one();
    let mut lefts: Vec<(Poly, u64)> = Vec::new();
    let mut frac_groups: BTreeMap<Poly, Q> = BTreeMap::new();
    let mut pow_groups: BTreeMap<Nf, Nf> = BTreeMap::new();

    for (atom, k) in pows {
        debug_assert!(!k.is_zero());
        match atom {
            Atom::FracPow { base, expo } => {
                let e = frac_groups.entry(base).or_insert_with(Q::zero);
                *e += expo * &k;
            }
            Atom::Pow { base, expo } => {
                let e = pow_groups.entry(base).or_insert_with(Nf::zero);
                *e = e.add(&expo.scale(&k));
            }
            other => {
                debug_assert!(k.is_positive(), "negative exponent inside polynomial");
                out.insert(other, k);
            }
        }
    }

    for (base, t) in frac_groups {
        if t.is_zero() {
            continue;
        }
        debug_assert!(t.is_positive());
        let n = t.floor();
        let f = &t - &n;
        let n = n.to_integer();
        if let Some(c) = base.as_const() {
            if !n.is_zero() {
                coeff *= big_int_pow(&c, &n);
            }
            if !f.is_zero() {
                match exact_frac_pow(&c, &f) {
                    Some(v) => coeff *= v,
                    None => {
                        out.insert(Atom::FracPow { base, expo: f }, Q::one());
                    }
                }
            }
        } else {
            if n.is_positive() {
                lefts.push((base.clone(), n.to_u64().expect("exponent out of range")));
            }
            if !f.is_zero() {
                out.insert(Atom::FracPow { base, expo: f }, Q::one());
            }
        }
    }

    for (base, total) in pow_groups {
        if total.is_zero() {
            continue;
        }
        if let Some(r) = total.as_rational() {
            // The exponent collapsed to a constant. Push simple cases back
            // into the polynomial algebra; keep the rest symbolic.
            if r.is_integer() && r.is_positive() && base.den.is_one() {
                lefts.push((
                    base.num.clone(),
                    r.to_integer().to_u64().expect("exponent out of range"),
                ));
            } else {
                out.insert(
                    Atom::Pow {
                        base,
                        expo: Nf::constant(r),
                    },
                    Q::one(),
                );
            }
        } else {
            out.insert(Atom::Pow { base, expo: total }, Q::one());
        }
    }

    let exparg = match exparg {
        Some(e) if !e.is_zero() => Some(e),
        _ => None,
    };
    (Mono { pows: out, exparg }, coeff, lefts)
}

/// Total degree over atoms; exponential factors do not contribute.
fn mono_degree(m: &Mono) -> Q {
    m.pows.values().fold(Q::zero(), |s, k| s + k)
}

/// Graded-lexicographic comparison: total degree first, then the exponent
/// vectors over the union of atoms in atom order (a missing atom counts as
/// exponent zero). Unlike the raw map ordering this is multiplicative,
/// which division by leading terms needs to make progress.
fn mono_cmp(a: &Mono, b: &Mono) -> Ordering {
    let by_degree = mono_degree(a).cmp(&mono_degree(b));
    if by_degree != Ordering::Equal {
        return by_degree;
    }
    let mut ia = a.pows.iter();
    let mut ib = b.pows.iter();
    loop {
        return match (ia.next(), ib.next()) {
            (None, None) => a.exparg.cmp(&b.exparg),
            // the side that still has atoms holds a positive exponent on an
            // atom the other lacks, and that atom is the first difference
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (Some((ka, ea)), Some((kb, eb))) => match ka.cmp(kb) {
                Ordering::Less => Ordering::Greater,
                Ordering::Greater => Ordering::Less,
                Ordering::Equal => match ea.cmp(eb) {
                    Ordering::Equal => continue,
                    other => other,
                },
            },
        };
    }
}

/// Monomial quotient a/b, or None when some exponent of b exceeds its
/// counterpart in a. Exponential factors subtract exactly.
fn mono_try_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut pows = a.pows.clone();
    for (atom, k) in &b.pows {
        match pows.get(atom) {
            Some(e) if e >= k => {
                let rest = e - k;
                if rest.is_zero() {
                    pows.remove(atom);
                } else {
                    pows.insert(atom.clone(), rest);
                }
            }
            _ => return None,
        }
    }
    let exparg = match (&a.exparg, &b.exparg) {
        (x, None) => x.clone(),
        (Some(p), Some(q)) => opt_exparg(p.sub(q)),
        (None, Some(q)) => opt_exparg(Nf::zero().sub(q)),
    };
    Some(Mono { pows, exparg })
}

fn mono_mul(a: &Mono, b: &Mono) -> (Mono, Q, Vec<(Poly, u64)>) {
    let mut pows = a.pows.clone();
    for (atom, k) in &b.pows {
        let e = pows.entry(atom.clone()).or_insert_with(Q::zero);
        *e += k;
        if e.is_zero() {
            pows.remove(atom);
        }
    }
    let ea = a.exparg.as_deref().cloned().unwrap_or_else(Nf::zero);
    let eb = b.exparg.as_deref().cloned().unwrap_or_else(Nf::zero);
    normalize_mono(pows, opt_exparg(ea.add(&eb)))
}

/// p^f for fractional f in (0,1). Monomials distribute the exponent onto
/// their atoms; other polynomials become a FracPow atom after content
/// extraction.
fn poly_frac_pow(p: &Poly, f: &Q) -> Poly {
    debug_assert!(f.is_positive() && f < &Q::one());
    if p.is_zero() {
        return Poly::zero();
    }
    if let Some((m, c)) = p.single_mono() {
        let mut pows: BTreeMap<Atom, Q> = BTreeMap::new();
        let mut acc = Poly::one();
        for (atom, k) in &m.pows {
            match atom {
                Atom::FracPow { base, expo } => {
                    let t = expo * k * f;
                    acc = acc.mul(&frac_pow_of_poly_total(base, &t));
                }
                Atom::Pow { base, expo } => {
                    pows.insert(
                        Atom::Pow {
                            base: base.clone(),
                            expo: expo.scale(&(k * f)),
                        },
                        Q::one(),
                    );
                }
                other => {
                    pows.insert(other.clone(), k * f);
                }
            }
        }
        let exparg = m
            .exparg
            .as_deref()
            .map(|e| e.scale(f))
            .and_then(|e| opt_exparg(e).map(|b| *b));
        let mut coeff = Q::one();
        if !c.is_one() {
            match exact_frac_pow(c, f) {
                Some(v) => coeff = v,
                None => {
                    pows.insert(
                        Atom::FracPow {
                            base: Poly::constant(c.clone()),
                            expo: f.clone(),
                        },
                        Q::one(),
                    );
                }
            }
        }
        let (mono, cf, lefts) = normalize_mono(pows, exparg.map(Box::new));
        let mut piece = Poly::from_mono(mono, coeff * cf);
        for (pp, n) in lefts {
            piece = piece.mul(&pp.pow_usize(n));
        }
        return acc.mul(&piece);
    }
    // multi-term: strip positive rational and monomial content first
    let cc = p.content_coeff();
    let cm = p.content_pows();
    let mut core = p.clone();
    if !cm.is_empty() {
        core = core.div_pows(&cm);
    }
    if !cc.is_one() {
        core = core.scale(&(Q::one() / &cc));
    }
    let mut result = Poly::from_mono(
        Mono::from_atom(Atom::FracPow {
            base: core,
            expo: f.clone(),
        }),
        Q::one(),
    );
    if !cm.is_empty() {
        let scaled: BTreeMap<Atom, Q> = cm.into_iter().map(|(a, k)| (a, k * f)).collect();
        let (mono, cf, lefts) = normalize_mono(scaled, None);
        let mut piece = Poly::from_mono(mono, cf);
        for (pp, n) in lefts {
            piece = piece.mul(&pp.pow_usize(n));
        }
        result = result.mul(&piece);
    }
    if !cc.is_one() {
        match exact_frac_pow(&cc, f) {
            Some(v) => result = result.scale(&v),
            None => {
                result = result.mul(&Poly::from_mono(
                    Mono::from_atom(Atom::FracPow {
                        base: Poly::constant(cc),
                        expo: f.clone(),
                    }),
                    Q::one(),
                ));
            }
        }
    }
    result
}

/// base^t for arbitrary positive rational t, splitting integer and
/// fractional parts.
fn frac_pow_of_poly_total(base: &Poly, t: &Q) -> Poly {
    debug_assert!(t.is_positive());
    let n = t.floor().to_integer();
    let f = t - Q::from_integer(n.clone());
    let mut acc = if n.is_zero() {
        Poly::one()
    } else {
        base.pow_big(&n)
    };
    if !f.is_zero() {
        acc = acc.mul(&poly_frac_pow(base, &f));
    }
    acc
}

pub(crate) fn pow_rat(x: &Nf, q: &Q) -> Nf {
    if q.is_zero() {
        return Nf::one();
    }
    if x.is_zero() {
        if q.is_positive() {
            return Nf::zero();
        }
        return Nf::from_atom(Atom::Pow {
            base: Nf::zero(),
            expo: Nf::constant(q.clone()),
        });
    }
    if q.is_one() {
        return x.clone();
    }
    let (base, qq) = if q.is_negative() {
        (x.inv(), -q.clone())
    } else {
        (x.clone(), q.clone())
    };
    let n = qq.floor().to_integer();
    let f = &qq - Q::from_integer(n.clone());
    let mut num = base.num.pow_big(&n);
    let mut den = base.den.pow_big(&n);
    if !f.is_zero() {
        num = num.mul(&poly_frac_pow(&base.num, &f));
        den = den.mul(&poly_frac_pow(&base.den, &f));
    }
    Nf::reduced(num, den)
}

// ---------------------------------------------------------------------
// expression -> normal form
// ---------------------------------------------------------------------

struct Ctx {
    depth: u32,
    renames: Vec<(String, String)>,
}

impl Ctx {
    fn root() -> Self {
        Ctx {
            depth: 0,
            renames: Vec::new(),
        }
    }
}

pub(crate) fn to_nf(e: &Expr) -> Nf {
    nf_rec(e, &mut Ctx::root())
}

fn nf_rec(e: &Expr, ctx: &mut Ctx) -> Nf {
    match e.node() {
        Node::Rat(q) => Nf::constant(q.clone()),
        Node::Float(x) => {
            let q = Q::from_float(x.0).expect("non-finite float in expression");
            Nf::constant(q)
        }
        Node::Var(v) => {
            for (user, canon) in ctx.renames.iter().rev() {
                if user == v {
                    return Nf::from_atom(Atom::Var(canon.clone()));
                }
            }
            Nf::from_atom(Atom::Var(v.clone()))
        }
        Node::Add(xs) => {
            let mut acc = Nf::zero();
            for x in xs {
                acc = acc.add(&nf_rec(x, ctx));
            }
            acc
        }
        Node::Mul(xs) => {
            let mut acc = Nf::one();
            for x in xs {
                if acc.is_zero() {
                    return acc;
                }
                acc = acc.mul(&nf_rec(x, ctx));
            }
            acc
        }
        Node::Pow(b, x) => {
            let e_nf = nf_rec(x, ctx);
            if let Some(q) = e_nf.as_rational() {
                return pow_rat(&nf_rec(b, ctx), &q);
            }
            let b_nf = nf_rec(b, ctx);
            // exp(S)^e = exp(S*e)
            if b_nf.den.is_one() {
                if let Some((m, c)) = b_nf.num.single_mono() {
                    if m.pows.is_empty() && c.is_one() {
                        if let Some(s) = m.exparg.as_deref() {
                            return exp_nf(s.mul(&e_nf));
                        }
                    }
                }
            }
            Nf::from_atom(Atom::Pow {
                base: b_nf,
                expo: e_nf,
            })
        }
        Node::Elem(f, a) => {
            let a_nf = nf_rec(a, ctx);
            match f {
                ElemFn::Exp => exp_nf(a_nf),
                ElemFn::Log => log_nf(a_nf),
                ElemFn::Sqrt => pow_rat(&a_nf, &Q::new(BigInt::one(), BigInt::from(2))),
                ElemFn::Sin => trig_nf(a_nf, true),
                ElemFn::Cos => trig_nf(a_nf, false),
            }
        }
        Node::Opaque { name, orders, args } => {
            let args_nf: Vec<Nf> = args.iter().map(|a| nf_rec(a, ctx)).collect();
            Nf::from_atom(Atom::Opaque {
                name: name.clone(),
                orders: orders.clone(),
                args: args_nf,
            })
        }
        Node::Integral { lo, hi, body, dummy } => {
            let lo_nf = nf_rec(lo, ctx);
            let hi_nf = nf_rec(hi, ctx);
            let marker = format!("{}{}", DUMMY_MARK, ctx.depth);
            ctx.renames.push((dummy.clone(), marker));
            ctx.depth += 1;
            let body_nf = nf_rec(body, ctx);
            ctx.depth -= 1;
            ctx.renames.pop();
            if body_nf.is_zero() {
                return Nf::zero();
            }
            let depth = ctx.depth;
            let part = |upper: Nf| -> Nf {
                if upper.is_zero() {
                    Nf::zero()
                } else {
                    Nf::from_atom(Atom::Int {
                        upper,
                        body: body_nf.clone(),
                        depth,
                    })
                }
            };
            part(hi_nf).sub(&part(lo_nf))
        }
    }
}

/// exp of a normal form, extracting rational-coefficient logarithms:
/// exp(c*log Z + R) = Z^c * exp(R). Valid wherever log Z is defined.
fn exp_nf(a: Nf) -> Nf {
    if a.is_zero() {
        return Nf::one();
    }
    if a.den.is_one() {
        let mut rest = Poly::zero();
        let mut factor = Nf::one();
        let mut extracted = false;
        for (m, c) in &a.num.0 {
            let single_log = m.exparg.is_none()
                && m.pows.len() == 1
                && m.pows.values().next().unwrap().is_one();
            if single_log {
                if let Atom::Log(z) = m.pows.keys().next().unwrap() {
                    factor = factor.mul(&pow_rat(z, c));
                    extracted = true;
                    continue;
                }
            }
            rest = rest.add(&Poly::from_mono(m.clone(), c.clone()));
        }
        if extracted {
            let rest_nf = Nf::from_poly(rest);
            let tail = if rest_nf.is_zero() {
                Nf::one()
            } else {
                Nf::from_poly(Poly::from_mono(
                    Mono {
                        pows: BTreeMap::new(),
                        exparg: opt_exparg(rest_nf),
                    },
                    Q::one(),
                ))
            };
            return factor.mul(&tail);
        }
    }
    Nf::from_poly(Poly::from_mono(
        Mono {
            pows: BTreeMap::new(),
            exparg: opt_exparg(a),
        },
        Q::one(),
    ))
}

/// log of a normal form. Only the exponential factor is peeled off
/// (log(exp(S) * R) = S + log R), which is exact wherever the original
/// logarithm is defined.
fn log_nf(a: Nf) -> Nf {
    if a.is_one() {
        return Nf::zero();
    }
    if a.den.is_one() {
        if let Some((m, c)) = a.num.single_mono() {
            if let Some(s) = m.exparg.as_deref() {
                let rest = Nf::from_poly(Poly::from_mono(
                    Mono {
                        pows: m.pows.clone(),
                        exparg: None,
                    },
                    c.clone(),
                ));
                if rest.is_one() {
                    return s.clone();
                }
                return s.add(&Nf::from_atom(Atom::Log(rest)));
            }
        }
    }
    Nf::from_atom(Atom::Log(a))
}

fn trig_nf(a: Nf, is_sin: bool) -> Nf {
    if a.is_zero() {
        return if is_sin { Nf::zero() } else { Nf::one() };
    }
    // canonical representative: positive leading coefficient
    let lead_neg = a
        .num
        .leading()
        .map_or(false, |(_, c)| c.is_negative());
    let (arg, flipped) = if lead_neg { (a.neg(), true) } else { (a, false) };
    let atom = if is_sin {
        Atom::Sin(arg)
    } else {
        Atom::Cos(arg)
    };
    let v = Nf::from_atom(atom);
    if flipped && is_sin {
        v.neg()
    } else {
        v
    }
}

// ---------------------------------------------------------------------
// normal form -> expression
// ---------------------------------------------------------------------

struct NamePlan {
    names: Vec<String>,
}

impl NamePlan {
    fn build(nf: &Nf) -> NamePlan {
        let mut avoid: BTreeSet<String> = BTreeSet::new();
        let mut max_depth: i64 = -1;
        scan_nf(nf, &mut avoid, &mut max_depth);
        let candidates = ["s", "t", "r", "p", "q", "m", "n", "w"];
        let mut names = Vec::new();
        for _ in 0..=max_depth {
            let mut chosen = None;
            for c in candidates {
                if !avoid.contains(c) && !names.iter().any(|n| n == c) {
                    chosen = Some(c.to_string());
                    break;
                }
            }
            let name = chosen.unwrap_or_else(|| {
                let mut k = 1u32;
                loop {
                    let cand = format!("s{k}");
                    if !avoid.contains(&cand) && !names.iter().any(|n| *n == cand) {
                        break cand;
                    }
                    k += 1;
                }
            });
            names.push(name);
        }
        NamePlan { names }
    }

    fn name(&self, depth: u32) -> &str {
        &self.names[depth as usize]
    }
}

fn scan_nf(nf: &Nf, avoid: &mut BTreeSet<String>, max_depth: &mut i64) {
    for poly in [&nf.num, &nf.den] {
        for m in poly.0.keys() {
            for atom in m.pows.keys() {
                scan_atom(atom, avoid, max_depth);
            }
            if let Some(e) = m.exparg.as_deref() {
                scan_nf(e, avoid, max_depth);
            }
        }
    }
}

fn scan_atom(atom: &Atom, avoid: &mut BTreeSet<String>, max_depth: &mut i64) {
    match atom {
        Atom::Var(v) => match dummy_depth(v) {
            Some(d) => *max_depth = (*max_depth).max(d as i64),
            None => {
                avoid.insert(v.clone());
            }
        },
        Atom::Opaque { name, args, .. } => {
            avoid.insert(name.clone());
            for a in args {
                scan_nf(a, avoid, max_depth);
            }
        }
        Atom::Log(a) | Atom::Sin(a) | Atom::Cos(a) => scan_nf(a, avoid, max_depth),
        Atom::Int { upper, body, depth } => {
            *max_depth = (*max_depth).max(*depth as i64);
            scan_nf(upper, avoid, max_depth);
            scan_nf(body, avoid, max_depth);
        }
        Atom::FracPow { base, .. } => {
            for m in base.0.keys() {
                for a in m.pows.keys() {
                    scan_atom(a, avoid, max_depth);
                }
                if let Some(e) = m.exparg.as_deref() {
                    scan_nf(e, avoid, max_depth);
                }
            }
        }
        Atom::Pow { base, expo } => {
            scan_nf(base, avoid, max_depth);
            scan_nf(expo, avoid, max_depth);
        }
    }
}

pub(crate) fn render(nf: &Nf) -> Expr {
    let plan = NamePlan::build(nf);
    render_nf(nf, &plan)
}

fn render_nf(nf: &Nf, plan: &NamePlan) -> Expr {
    let num = render_poly(&nf.num, plan);
    if nf.den.is_one() {
        num
    } else {
        num / render_poly(&nf.den, plan)
    }
}

fn render_poly(p: &Poly, plan: &NamePlan) -> Expr {
    if p.is_zero() {
        return Expr::zero();
    }
    let mut terms = Vec::new();
    for (m, c) in p.0.iter().rev() {
        let mut parts = vec![Expr::from_q(c.clone())];
        for (atom, k) in &m.pows {
            let base = render_atom(atom, plan);
            if k.is_one() {
                parts.push(base);
            } else {
                parts.push(Expr::pow(base, Expr::from_q(k.clone())));
            }
        }
        if let Some(e) = m.exparg.as_deref() {
            parts.push(Expr::exp(render_nf(e, plan)));
        }
        terms.push(Expr::product(parts));
    }
    Expr::sum(terms)
}

fn render_atom(atom: &Atom, plan: &NamePlan) -> Expr {
    match atom {
        Atom::Var(v) => match dummy_depth(v) {
            Some(d) => Expr::var(plan.name(d)),
            None => Expr::var(v),
        },
        Atom::Opaque { name, orders, args } => Expr::opaque_deriv(
            name,
            orders.clone(),
            args.iter().map(|a| render_nf(a, plan)).collect(),
        ),
        Atom::Log(a) => Expr::log(render_nf(a, plan)),
        Atom::Sin(a) => Expr::sin(render_nf(a, plan)),
        Atom::Cos(a) => Expr::cos(render_nf(a, plan)),
        Atom::Int { upper, body, depth } => Expr::integral(
            Expr::zero(),
            render_nf(upper, plan),
            render_nf(body, plan),
            plan.name(*depth),
        ),
        Atom::FracPow { base, expo } => Expr::pow(
            render_poly(base, plan),
            Expr::from_q(expo.clone()),
        ),
        Atom::Pow { base, expo } => {
            Expr::pow(render_nf(base, plan), render_nf(expo, plan))
        }
    }
}

/// Rewrites an expression into its canonical form: a quotient of
/// atom-monomial polynomials with combined exponentials, split integrals
/// based at zero, and canonical integration dummies.
pub fn simplify(e: &Expr) -> Expr {
    render(&to_nf(e))
}

/// Splits an expression into simplified (numerator, denominator) with the
/// denominator normalized to a polynomial part (no nested quotients). Useful
/// for clearing denominators before exact linear elimination.
pub fn split_fraction(e: &Expr) -> (Expr, Expr) {
    let nf = to_nf(e);
    let plan = NamePlan::build(&nf);
    let num = render_poly(&nf.num, &plan);
    let den = render_poly(&nf.den, &plan);
    (num, den)
}

// ---------------------------------------------------------------------
// numeric zero probing
// ---------------------------------------------------------------------

/// Options for `zero_probe`. Constraint expressions restrict the sample
/// domain: `avoid` entries must stay at least `margin` away from zero in
/// absolute value, `positive` entries must exceed `margin`. Opaque
/// symbols without an entry in `bind` receive seeded generic smooth
/// definitions.
#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub margin: f64,
    pub range: (f64, f64),
    pub avoid: Vec<Expr>,
    pub positive: Vec<Expr>,
    pub bind: BTreeMap<String, FuncDef>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            samples: 12,
            tol: 1e-9,
            seed: 0,
            margin: 0.25,
            range: (-3.0, 3.0),
            avoid: Vec::new(),
            positive: Vec::new(),
            bind: BTreeMap::new(),
        }
    }
}

fn fnv(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// A generic smooth function of the given arity: a low-degree polynomial
/// plus a sine term, with small seeded rational coefficients. Used to
/// give opaque symbols concrete values during numeric probing.
pub(crate) fn random_smooth_def(name: &str, arity: usize, seed: u64) -> FuncDef {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv(name));
    let mut coeff = |lo: i64, hi: i64| {
        let n = rng.gen_range(lo..=hi);
        let d = rng.gen_range(2..=4i64);
        Expr::rat(n, d)
    };
    let params: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
    let mut terms = vec![coeff(-8, 8)];
    let mut phase = Vec::new();
    for p in &params {
        let v = Expr::var(p);
        terms.push(coeff(-8, 8) * v.clone());
        terms.push(coeff(-6, 6) * v.clone() * v.clone());
        phase.push(coeff(2, 6) * v.clone());
    }
    terms.push(coeff(-4, 4) * Expr::sin(Expr::sum(phase)));
    let body = Expr::sum(terms);
    let refs: Vec<&str> = params.iter().map(|s| s.as_str()).collect();
    FuncDef::new(&refs, body)
}

fn opaque_arities(e: &Expr, out: &mut BTreeMap<String, usize>) {
    e.walk(&mut |n| {
        if let Node::Opaque { name, args, .. } = n {
            out.entry(name.clone()).or_insert(args.len());
        }
    });
}

/// Tests whether an expression vanishes identically by sampling random
/// rational points, after replacing opaque symbols with generic smooth
/// functions. Returns false when no admissible sample can be drawn.
pub fn zero_probe(e: &Expr, opts: &ProbeOptions) -> bool {
    let s = simplify(e);
    if s.is_zero() {
        return true;
    }
    let mut arities = BTreeMap::new();
    opaque_arities(&s, &mut arities);
    for c in opts.avoid.iter().chain(&opts.positive) {
        opaque_arities(c, &mut arities);
    }
    let mut su = Substitution::new();
    for (name, arity) in &arities {
        let def = opts
            .bind
            .get(name)
            .cloned()
            .unwrap_or_else(|| random_smooth_def(name, *arity, opts.seed));
        su.funcs.insert(name.clone(), def);
    }
    let target = substitute(&s, &su);
    let avoid: Vec<Expr> = opts.avoid.iter().map(|c| substitute(c, &su)).collect();
    let positive: Vec<Expr> = opts.positive.iter().map(|c| substitute(c, &su)).collect();

    let mut vars: BTreeSet<String> = target.free_vars();
    for c in avoid.iter().chain(&positive) {
        vars.extend(c.free_vars());
    }
    let vars: Vec<String> = vars.into_iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let lo16 = (opts.range.0 * 16.0).round() as i64;
    let hi16 = (opts.range.1 * 16.0).round() as i64;
    for _ in 0..opts.samples {
        let mut found = false;
        'attempt: for _ in 0..200 {
            let mut binding = Binding::new();
            for v in &vars {
                let k = rng.gen_range(lo16..=hi16);
                binding.set_var(v, k as f64 / 16.0);
            }
            for c in &avoid {
                match eval_numeric(c, &binding) {
                    Ok(v) if v.abs() >= opts.margin => {}
                    _ => continue 'attempt,
                }
            }
            for c in &positive {
                match eval_numeric(c, &binding) {
                    Ok(v) if v >= opts.margin => {}
                    _ => continue 'attempt,
                }
            }
            let v = match eval_numeric(&target, &binding) {
                Ok(v) => v,
                Err(_) => continue 'attempt,
            };
            // scale the tolerance by the largest term to absorb
            // cancellation error in wide sums
            let mut scale = 0.0f64;
            if let Node::Add(ts) = target.node() {
                for t in ts {
                    if let Ok(tv) = eval_numeric(t, &binding) {
                        scale = scale.max(tv.abs());
                    }
                }
            }
            if v.abs() > opts.tol * (1.0 + scale) {
                return false;
            }
            found = true;
            break;
        }
        if !found {
            return false;
        }
    }
    true
}
