use std::collections::HashMap;
use std::sync::Arc;

use super::diff::differentiate;
use super::quad;
use super::subst::FuncDef;
use super::{q_to_f64, Expr, Node};

/// Concrete realization of an opaque function symbol.
#[derive(Clone)]
pub enum FuncImpl {
    /// Symbolic lambda; derivatives are taken exactly.
    Def(FuncDef),
    /// Native callable; derivatives fall back to Richardson-extrapolated
    /// central differences with the binding's step.
    Native {
        arity: usize,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for FuncImpl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FuncImpl::Def(d) => write!(f, "Def({} params)", d.params.len()),
            FuncImpl::Native { arity, .. } => write!(f, "Native(arity {arity})"),
        }
    }
}

impl FuncImpl {
    fn arity(&self) -> usize {
        match self {
            FuncImpl::Def(d) => d.params.len(),
            FuncImpl::Native { arity, .. } => *arity,
        }
    }
}

/// Values for free variables and opaque function symbols, plus the
/// numeric policies used during evaluation.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: HashMap<String, f64>,
    funcs: HashMap<String, FuncImpl>,
    /// Tolerance handed to the adaptive quadrature for integral nodes.
    pub quad_tol: f64,
    /// Maximum bisection depth of the adaptive quadrature.
    pub quad_max_depth: u32,
    /// Step for finite-difference derivatives of native callables.
    pub fd_step: f64,
}

impl Default for Binding {
    fn default() -> Self {
        Binding {
            vars: HashMap::new(),
            funcs: HashMap::new(),
            quad_tol: 1e-10,
            quad_max_depth: 24,
            fd_step: 1e-4,
        }
    }
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn set_var(&mut self, name: &str, value: f64) -> &mut Self {
        self.vars.insert(name.to_string(), value);
        self
    }

    pub fn with_var(mut self, name: &str, value: f64) -> Self {
        self.set_var(name, value);
        self
    }

    pub fn var(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(|s| s.as_str())
    }

    pub fn set_func(&mut self, name: &str, imp: FuncImpl) -> &mut Self {
        self.funcs.insert(name.to_string(), imp);
        self
    }

    pub fn bind_def(&mut self, name: &str, def: FuncDef) -> &mut Self {
        self.set_func(name, FuncImpl::Def(def))
    }

    pub fn bind_native<F>(&mut self, name: &str, arity: usize, f: F) -> &mut Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.set_func(
            name,
            FuncImpl::Native {
                arity,
                f: Arc::new(f),
            },
        )
    }

    pub fn func(&self, name: &str) -> Option<&FuncImpl> {
        self.funcs.get(name)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVar(String),
    #[error("unbound function symbol `{0}`")]
    UnboundFunc(String),
    #[error("arity mismatch for `{name}`: bound with {bound} arguments, applied to {applied}")]
    Arity {
        name: String,
        bound: usize,
        applied: usize,
    },
    #[error("domain error in `{at}`: {reason}")]
    Domain { at: String, reason: String },
    #[error("non-finite result in `{at}`")]
    NonFinite { at: String },
}

fn at(e: &Expr) -> String {
    let s = format!("{e}");
    if s.len() > 96 {
        format!("{}...", &s[..93])
    } else {
        s
    }
}

struct EvalCtx<'a> {
    b: &'a Binding,
    /// Integral dummies and lambda parameters, innermost last.
    scope: Vec<(String, f64)>,
    /// Memoized integral values keyed by node identity and the values of
    /// the integral's free variables.
    memo: HashMap<(usize, u64), f64>,
    free_cache: HashMap<usize, Vec<String>>,
    deriv_cache: HashMap<(String, Vec<u32>), Expr>,
}

impl<'a> EvalCtx<'a> {
    fn lookup(&self, name: &str) -> Option<f64> {
        for (n, v) in self.scope.iter().rev() {
            if n == name {
                return Some(*v);
            }
        }
        self.b.var(name)
    }

    fn eval(&mut self, e: &Expr) -> Result<f64, EvalError> {
        match e.node() {
            Node::Rat(q) => Ok(q_to_f64(q)),
            Node::Float(x) => Ok(x.0),
            Node::Var(v) => self
                .lookup(v)
                .ok_or_else(|| EvalError::UnboundVar(v.clone())),
            Node::Add(xs) => {
                let mut acc = 0.0;
                for x in xs {
                    acc += self.eval(x)?;
                }
                Ok(acc)
            }
            Node::Mul(xs) => {
                let mut acc = 1.0;
                for x in xs {
                    acc *= self.eval(x)?;
                }
                Ok(acc)
            }
            Node::Pow(b, x) => {
                let vb = self.eval(b)?;
                let r = if let Some(k) = x.as_i64() {
                    if vb == 0.0 && k < 0 {
                        return Err(EvalError::Domain {
                            at: at(e),
                            reason: "zero raised to a negative power".to_string(),
                        });
                    }
                    vb.powi(k as i32)
                } else {
                    let vx = self.eval(x)?;
                    vb.powf(vx)
                };
                if r.is_nan() {
                    return Err(EvalError::Domain {
                        at: at(e),
                        reason: format!("invalid power with base {vb}"),
                    });
                }
                if !r.is_finite() {
                    return Err(EvalError::NonFinite { at: at(e) });
                }
                Ok(r)
            }
            Node::Elem(f, a) => {
                let v = self.eval(a)?;
                let r = match f {
                    super::ElemFn::Exp => v.exp(),
                    super::ElemFn::Log => {
                        if v <= 0.0 {
                            return Err(EvalError::Domain {
                                at: at(e),
                                reason: format!("log of non-positive value {v}"),
                            });
                        }
                        v.ln()
                    }
                    super::ElemFn::Sin => v.sin(),
                    super::ElemFn::Cos => v.cos(),
                    super::ElemFn::Sqrt => {
                        // absorb tiny negative round-off
                        if v < 0.0 && v > -1e-12 {
                            0.0
                        } else if v < 0.0 {
                            return Err(EvalError::Domain {
                                at: at(e),
                                reason: format!("sqrt of negative value {v}"),
                            });
                        } else {
                            v.sqrt()
                        }
                    }
                };
                if !r.is_finite() {
                    return Err(EvalError::NonFinite { at: at(e) });
                }
                Ok(r)
            }
            Node::Opaque { name, orders, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                let imp = self
                    .b
                    .func(name)
                    .ok_or_else(|| EvalError::UnboundFunc(name.clone()))?
                    .clone();
                if imp.arity() != args.len() {
                    return Err(EvalError::Arity {
                        name: name.clone(),
                        bound: imp.arity(),
                        applied: args.len(),
                    });
                }
                match imp {
                    FuncImpl::Def(def) => {
                        let body = if orders.iter().all(|&k| k == 0) {
                            def.body.clone()
                        } else {
                            self.derived_body(name, &def, orders)
                        };
                        let base = self.scope.len();
                        for (p, v) in def.params.iter().zip(&vals) {
                            self.scope.push((p.clone(), *v));
                        }
                        let r = self.eval(&body);
                        self.scope.truncate(base);
                        r
                    }
                    FuncImpl::Native { f, .. } => {
                        let mut vals = vals;
                        let mut orders = orders.clone();
                        let r = native_deriv(&f, &mut vals, &mut orders, self.b.fd_step);
                        if !r.is_finite() {
                            return Err(EvalError::NonFinite { at: at(e) });
                        }
                        Ok(r)
                    }
                }
            }
            Node::Integral { lo, hi, body, dummy } => {
                let vlo = self.eval(lo)?;
                let vhi = self.eval(hi)?;
                let key = self.memo_key(e, vlo, vhi)?;
                if let Some(k) = key {
                    if let Some(&v) = self.memo.get(&k) {
                        return Ok(v);
                    }
                }
                let tol = self.b.quad_tol;
                let max_depth = self.b.quad_max_depth;
                let mut f = |x: f64| -> Result<f64, EvalError> {
                    self.scope.push((dummy.clone(), x));
                    let r = self.eval(body);
                    self.scope.pop();
                    r
                };
                let v = quad::integrate(&mut f, vlo, vhi, tol, max_depth)?;
                if !v.is_finite() {
                    return Err(EvalError::NonFinite { at: at(e) });
                }
                if let Some(k) = key {
                    self.memo.insert(k, v);
                }
                Ok(v)
            }
        }
    }

    fn derived_body(&mut self, name: &str, def: &FuncDef, orders: &[u32]) -> Expr {
        let key = (name.to_string(), orders.to_vec());
        if let Some(b) = self.deriv_cache.get(&key) {
            return b.clone();
        }
        let mut body = def.body.clone();
        for (p, &k) in def.params.iter().zip(orders) {
            for _ in 0..k {
                body = differentiate(&body, p);
            }
        }
        self.deriv_cache.insert(key, body.clone());
        body
    }

    /// Key mixing the integral node identity with the current values of
    /// its free variables; None when some free variable is unbound (the
    /// subsequent evaluation will report the error).
    fn memo_key(&mut self, e: &Expr, vlo: f64, vhi: f64) -> Result<Option<(usize, u64)>, EvalError> {
        let id = e.ptr_id();
        if !self.free_cache.contains_key(&id) {
            let names: Vec<String> = e.free_vars().into_iter().collect();
            self.free_cache.insert(id, names);
        }
        let names = &self.free_cache[&id];
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |bits: u64| {
            h ^= bits;
            h = h.wrapping_mul(0x100000001b3);
        };
        mix(vlo.to_bits());
        mix(vhi.to_bits());
        for n in names {
            match self.lookup(n) {
                Some(v) => mix(v.to_bits()),
                None => return Ok(None),
            }
        }
        Ok(Some((id, h)))
    }
}

/// Richardson-extrapolated central difference for derivatives of a
/// native callable, one axis at a time.
fn native_deriv(
    f: &Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    vals: &mut Vec<f64>,
    orders: &mut Vec<u32>,
    h: f64,
) -> f64 {
    let axis = match orders.iter().position(|&k| k > 0) {
        Some(i) => i,
        None => return f(vals),
    };
    orders[axis] -= 1;
    let x0 = vals[axis];
    let mut d = |step: f64| -> f64 {
        vals[axis] = x0 + step;
        let plus = native_deriv(f, vals, orders, h);
        vals[axis] = x0 - step;
        let minus = native_deriv(f, vals, orders, h);
        vals[axis] = x0;
        (plus - minus) / (2.0 * step)
    };
    let d1 = d(h);
    let d2 = d(h / 2.0);
    orders[axis] += 1;
    (4.0 * d2 - d1) / 3.0
}

/// Evaluates an expression to a floating-point number under a binding.
/// Integrals are computed by adaptive quadrature and memoized for
/// repeated evaluation; errors carry the offending subexpression.
pub fn eval_numeric(e: &Expr, b: &Binding) -> Result<f64, EvalError> {
    let mut ctx = EvalCtx {
        b,
        scope: Vec::new(),
        memo: HashMap::new(),
        free_cache: HashMap::new(),
        deriv_cache: HashMap::new(),
    };
    ctx.eval(e)
}

/// Evaluates with a reusable memo across calls; useful when the same
/// integrals appear at many grid points with shared subvalues.
pub struct Evaluator<'a> {
    ctx: EvalCtx<'a>,
}

impl<'a> Evaluator<'a> {
    pub fn new(b: &'a Binding) -> Self {
        Evaluator {
            ctx: EvalCtx {
                b,
                scope: Vec::new(),
                memo: HashMap::new(),
                free_cache: HashMap::new(),
                deriv_cache: HashMap::new(),
            },
        }
    }

    pub fn eval_with(&mut self, e: &Expr, vars: &[(&str, f64)]) -> Result<f64, EvalError> {
        let base = self.ctx.scope.len();
        for (n, v) in vars {
            self.ctx.scope.push((n.to_string(), *v));
        }
        let r = self.ctx.eval(e);
        self.ctx.scope.truncate(base);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse;

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn arithmetic_and_elementary_functions() {
        let b = Binding::new().with_var("x", 2.0).with_var("y", 3.0);
        let v = eval_numeric(&p("x^2 + y / 2 - exp(0)"), &b).unwrap();
        assert!((v - 4.5).abs() < 1e-15);
        let v = eval_numeric(&p("log(exp(x)) + sin(0)"), &b).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unbound_variables_are_reported() {
        let b = Binding::new();
        match eval_numeric(&p("x + 1"), &b) {
            Err(EvalError::UnboundVar(v)) => assert_eq!(v, "x"),
            other => panic!("expected unbound variable error, got {other:?}"),
        }
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let b = Binding::new().with_var("x", -1.0);
        match eval_numeric(&p("1 + log(x)"), &b) {
            Err(EvalError::Domain { at, .. }) => assert!(at.contains("log(x)")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn lambda_bindings_differentiate_exactly() {
        let mut b = Binding::new().with_var("x", 0.5);
        b.bind_def("f", FuncDef::new(&["t"], p("t^3 + t")));
        let v = eval_numeric(&p("f''(x)"), &b).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
    }

    #[test]
    fn native_bindings_use_finite_differences() {
        let mut b = Binding::new().with_var("x", 0.7);
        b.bind_native("f", 1, |a| a[0].sin());
        let v = eval_numeric(&p("f'(x)"), &b).unwrap();
        assert!((v - 0.7f64.cos()).abs() < 1e-9, "got {v}");
        let v2 = eval_numeric(&p("f''(x)"), &b).unwrap();
        assert!((v2 + 0.7f64.sin()).abs() < 1e-6, "got {v2}");
    }

    #[test]
    fn integrals_integrate_numerically() {
        let b = Binding::new().with_var("x", 2.0);
        let v = eval_numeric(&p("int(0, x, t^2, t)"), &b).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-10);
        // nested integral
        let v = eval_numeric(&p("int(0, 1, int(0, s, 2*t, t), s)"), &b).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn integral_memoization_is_value_correct() {
        let b = Binding::new().with_var("x", 1.0).with_var("y", 4.0);
        // same node evaluated under two different dummy environments
        let e = p("int(0, y, int(0, 2, s + t, t), s)");
        let v = eval_numeric(&e, &b).unwrap();
        assert!((v - (4.0 * 2.0 * 2.0 / 2.0 + 2.0 * 16.0 / 2.0)).abs() < 1e-8);
    }
}
