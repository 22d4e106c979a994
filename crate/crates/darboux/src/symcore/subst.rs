use std::collections::BTreeMap;

use super::diff::differentiate;
use super::{Expr, Node};

/// A function definition used to replace an opaque symbol: formal
/// parameters plus a body expression in those parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncDef {
    pub params: Vec<String>,
    pub body: Expr,
}

impl FuncDef {
    pub fn new(params: &[&str], body: Expr) -> Self {
        FuncDef {
            params: params.iter().map(|s| s.to_string()).collect(),
            body,
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Simultaneous replacement of variables by expressions and of opaque
/// function symbols by definitions.
#[derive(Clone, Debug, Default)]
pub struct Substitution {
    pub vars: BTreeMap<String, Expr>,
    pub funcs: BTreeMap<String, FuncDef>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn var(mut self, name: &str, value: Expr) -> Self {
        self.vars.insert(name.to_string(), value);
        self
    }

    pub fn func(mut self, name: &str, def: FuncDef) -> Self {
        self.funcs.insert(name.to_string(), def);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.funcs.is_empty()
    }
}

/// Applies a simultaneous substitution. Integral dummies shadow variable
/// replacements, and are renamed when a replacement would capture them.
pub fn substitute(e: &Expr, s: &Substitution) -> Expr {
    if s.is_empty() {
        return e.clone();
    }
    subst_rec(e, s, &mut Vec::new())
}

/// Convenience wrapper replacing a single variable.
pub fn subst_var(e: &Expr, name: &str, value: &Expr) -> Expr {
    substitute(e, &Substitution::new().var(name, value.clone()))
}

fn subst_rec(e: &Expr, s: &Substitution, shadow: &mut Vec<String>) -> Expr {
    match e.node() {
        Node::Rat(_) | Node::Float(_) => e.clone(),
        Node::Var(v) => {
            if shadow.iter().any(|d| d == v) {
                e.clone()
            } else if let Some(r) = s.vars.get(v) {
                r.clone()
            } else {
                e.clone()
            }
        }
        Node::Add(xs) => Expr::sum(xs.iter().map(|x| subst_rec(x, s, shadow)).collect()),
        Node::Mul(xs) => Expr::product(xs.iter().map(|x| subst_rec(x, s, shadow)).collect()),
        Node::Pow(b, x) => Expr::pow(subst_rec(b, s, shadow), subst_rec(x, s, shadow)),
        Node::Elem(f, a) => Expr::elem(*f, subst_rec(a, s, shadow)),
        Node::Opaque { name, orders, args } => {
            let new_args: Vec<Expr> = args.iter().map(|a| subst_rec(a, s, shadow)).collect();
            if let Some(def) = s.funcs.get(name) {
                apply_func_def(def, orders, &new_args)
            } else {
                Expr::opaque_deriv(name, orders.clone(), new_args)
            }
        }
        Node::Integral { lo, hi, body, dummy } => {
            let new_lo = subst_rec(lo, s, shadow);
            let new_hi = subst_rec(hi, s, shadow);
            // Rename the dummy if a replacement that applies inside the
            // body mentions it, which would otherwise capture free
            // occurrences of that name in the replacement.
            let mut body = body.clone();
            let mut dummy = dummy.clone();
            if replacement_mentions(s, &body, &dummy, shadow) {
                let fresh = fresh_name(&dummy, s, &body);
                body = subst_rec(
                    &body,
                    &Substitution::new().var(&dummy, Expr::var(&fresh)),
                    &mut vec![],
                );
                dummy = fresh;
            }
            shadow.push(dummy.clone());
            let new_body = subst_rec(&body, s, shadow);
            shadow.pop();
            Expr::integral(new_lo, new_hi, new_body, &dummy)
        }
    }
}

/// True if some substitution entry that can fire inside `body` has the
/// dummy as a free variable of its replacement.
fn replacement_mentions(s: &Substitution, body: &Expr, dummy: &str, shadow: &[String]) -> bool {
    let free = body.free_vars();
    for v in &free {
        if v == dummy || shadow.iter().any(|d| d == v) {
            continue;
        }
        if let Some(r) = s.vars.get(v) {
            if r.free_vars().contains(dummy) {
                return true;
            }
        }
    }
    for name in body.opaque_names() {
        if let Some(def) = s.funcs.get(&name) {
            let mut fv = def.body.free_vars();
            for p in &def.params {
                fv.remove(p);
            }
            if fv.contains(dummy) {
                return true;
            }
        }
    }
    false
}

fn fresh_name(base: &str, s: &Substitution, body: &Expr) -> String {
    let mut avoid = body.free_vars();
    for r in s.vars.values() {
        avoid.extend(r.free_vars());
    }
    for def in s.funcs.values() {
        avoid.extend(def.body.free_vars());
    }
    let mut k = 1u32;
    loop {
        let cand = format!("{base}_{k}");
        if !avoid.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

/// Expands `f^(orders)(args)` for a concrete definition of `f`: the body
/// is differentiated in each formal parameter the stated number of times,
/// then the arguments are substituted for the parameters.
fn apply_func_def(def: &FuncDef, orders: &[u32], args: &[Expr]) -> Expr {
    assert_eq!(
        def.params.len(),
        args.len(),
        "function definition arity mismatch"
    );
    let mut body = def.body.clone();
    for (i, &k) in orders.iter().enumerate() {
        for _ in 0..k {
            body = differentiate(&body, &def.params[i]);
        }
    }
    let mut s = Substitution::new();
    for (p, a) in def.params.iter().zip(args) {
        s.vars.insert(p.clone(), a.clone());
    }
    substitute(&body, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse;

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn replaces_variables_simultaneously() {
        let e = p("x + y");
        let s = Substitution::new().var("x", p("y")).var("y", p("x"));
        assert_eq!(substitute(&e, &s), p("y + x"));
    }

    #[test]
    fn dummy_shadows_replacement() {
        let e = p("int(0, x, t^2, t)");
        let s = Substitution::new().var("t", p("99"));
        assert_eq!(substitute(&e, &s), e);
    }

    #[test]
    fn capture_is_avoided_by_renaming() {
        // Substituting x -> t + 1 inside an integral with dummy t must not
        // capture the replacement's t.
        let e = p("int(0, 1, x * t, t)");
        let s = Substitution::new().var("x", p("t + 1"));
        let out = substitute(&e, &s);
        let expected = p("int(0, 1, (t + 1) * t_1, t_1)");
        assert_eq!(out, expected);
    }

    #[test]
    fn func_def_expands_derivatives() {
        let e = p("f''(x) + f(0)");
        let def = FuncDef::new(&["t"], p("t^3"));
        let s = Substitution::new().func("f", def);
        let out = substitute(&e, &s);
        assert_eq!(out, p("6 * x"));
    }

    #[test]
    fn multi_arg_partial_expansion() {
        let e = p("pd(f, 1, 1)(x, y)");
        let def = FuncDef::new(&["a", "b"], p("a^2 * b"));
        let out = substitute(&e, &Substitution::new().func("f", def));
        assert_eq!(out, p("2 * x"));
    }
}
