use super::subst::{subst_var, Substitution};
use super::{substitute, ElemFn, Expr, Node};

/// Partial derivative of an expression with respect to a named variable.
///
/// Opaque function symbols differentiate by the chain rule into
/// higher-order opaque symbols. Integrals follow the Leibniz rule with
/// boundary terms; the integration dummy shadows the outer variable.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    match e.node() {
        Node::Rat(_) | Node::Float(_) => Expr::zero(),
        Node::Var(x) => {
            if x == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(xs) => Expr::sum(xs.iter().map(|x| differentiate(x, v)).collect()),
        Node::Mul(xs) => {
            let mut terms = Vec::new();
            for (i, xi) in xs.iter().enumerate() {
                let di = differentiate(xi, v);
                if di.is_zero() {
                    continue;
                }
                let mut factors = vec![di];
                for (j, xj) in xs.iter().enumerate() {
                    if j != i {
                        factors.push(xj.clone());
                    }
                }
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Pow(b, x) => {
            let db = differentiate(b, v);
            let dx = differentiate(x, v);
            if dx.is_zero() {
                // d(b^c) = c * b^(c-1) * db
                Expr::product(vec![
                    x.clone(),
                    Expr::pow(b.clone(), x.clone() - Expr::one()),
                    db,
                ])
            } else if db.is_zero() {
                // d(c^x) = c^x * log(c) * dx
                Expr::product(vec![e.clone(), Expr::log(b.clone()), dx])
            } else {
                // d(b^x) = b^x * (dx * log b + x * db / b)
                e.clone()
                    * (dx * Expr::log(b.clone()) + x.clone() * db / b.clone())
            }
        }
        Node::Elem(f, a) => {
            let da = differentiate(a, v);
            if da.is_zero() {
                return Expr::zero();
            }
            let outer = match f {
                ElemFn::Exp => e.clone(),
                ElemFn::Log => Expr::one() / a.clone(),
                ElemFn::Sin => Expr::cos(a.clone()),
                ElemFn::Cos => -Expr::sin(a.clone()),
                ElemFn::Sqrt => {
                    Expr::one() / (Expr::int(2) * Expr::sqrt(a.clone()))
                }
            };
            outer * da
        }
        Node::Opaque { name, orders, args } => {
            let mut terms = Vec::new();
            for (i, arg) in args.iter().enumerate() {
                let da = differentiate(arg, v);
                if da.is_zero() {
                    continue;
                }
                let mut bumped = orders.clone();
                bumped[i] += 1;
                terms.push(Expr::opaque_deriv(name, bumped, args.clone()) * da);
            }
            Expr::sum(terms)
        }
        Node::Integral { lo, hi, body, dummy } => {
            let dhi = differentiate(hi, v);
            let dlo = differentiate(lo, v);
            let mut terms = Vec::new();
            if !dhi.is_zero() {
                terms.push(dhi * subst_var(body, dummy, hi));
            }
            if !dlo.is_zero() {
                terms.push(-(dlo * subst_var(body, dummy, lo)));
            }
            if v != dummy && body.free_vars().contains(v) {
                // Differentiating under the integral sign. If the boundary
                // expressions mention the dummy name as an outer variable,
                // substitute() has already renamed on the boundary-term
                // path; here the body keeps its own dummy.
                terms.push(Expr::integral(
                    lo.clone(),
                    hi.clone(),
                    differentiate(body, v),
                    dummy,
                ));
            }
            Expr::sum(terms)
        }
    }
}

/// Total derivative along a parametrized curve: each variable `x_i`
/// becomes a function of the parameter with stated derivative `dx_i`.
pub fn directional_derivative(e: &Expr, rates: &[(String, Expr)]) -> Expr {
    let mut terms = Vec::new();
    for (name, rate) in rates {
        if rate.is_zero() {
            continue;
        }
        let d = differentiate(e, name);
        if !d.is_zero() {
            terms.push(d * rate.clone());
        }
    }
    Expr::sum(terms)
}

/// Substitutes the parametrization into an expression and differentiates
/// in the parameter: d/dt of e(x(t)).
pub fn derivative_along(e: &Expr, curve: &Substitution, t: &str) -> Expr {
    differentiate(&substitute(e, curve), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::{parse, simplify};

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    fn d(src: &str, v: &str) -> Expr {
        simplify(&differentiate(&p(src), v))
    }

    #[test]
    fn power_and_product_rules() {
        assert_eq!(d("x^3", "x"), p("3 * x^2"));
        assert_eq!(d("x * y", "x"), p("y"));
        assert_eq!(d("x / y", "y"), simplify(&p("-x / y^2")));
    }

    #[test]
    fn chain_rule_through_elementary_functions() {
        assert_eq!(d("exp(2*x)", "x"), simplify(&p("2 * exp(2*x)")));
        assert_eq!(d("log(x^2)", "x"), simplify(&p("2 / x")));
        assert_eq!(d("sin(x)^2 + cos(x)^2", "x"), Expr::zero());
    }

    #[test]
    fn opaque_symbols_accumulate_orders() {
        assert_eq!(d("f(x)", "x"), p("f'(x)"));
        assert_eq!(d("f(x*y)", "y"), simplify(&p("x * f'(x*y)")));
        let second = differentiate(&differentiate(&p("g(x, y)"), "x"), "y");
        assert_eq!(simplify(&second), simplify(&p("pd(g, 1, 1)(x, y)")));
    }

    #[test]
    fn integral_boundary_terms() {
        // d/dx int(0, x, f(t), t) = f(x)
        assert_eq!(d("int(0, x, f(t), t)", "x"), p("f(x)"));
        // lower boundary contributes with a minus sign
        assert_eq!(d("int(x, 1, f(t), t)", "x"), simplify(&p("-f(x)")));
        // dummy shadows the outer variable inside the body
        assert_eq!(d("int(0, 1, x * t, t)", "x"), simplify(&p("int(0, 1, t, t)")));
    }

    #[test]
    fn differentiation_under_the_integral() {
        let e = d("int(0, y, f(x + t), t)", "x");
        let expected = simplify(&p("int(0, y, f'(x + t), t)"));
        assert_eq!(e, expected);
    }
}
