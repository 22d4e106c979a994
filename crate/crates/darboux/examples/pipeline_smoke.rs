//! Drives the symbolic core end to end: parse, simplify, differentiate,
//! and evaluate an expression whose value needs adaptive quadrature.

use darboux::symcore::{differentiate, eval_numeric, parse, simplify, Binding};

fn main() {
    // u(x, y) = exp(-int_0^x g) * int_x^y exp(int_0^s g) ds with g = cos
    let u = parse("exp(-int(0, x, cos(t), t)) * int(x, y, exp(int(0, s, cos(t), t)), s)")
        .expect("parse");
    let u = simplify(&u);
    println!("u      = {u}");

    let ux = simplify(&differentiate(&u, "x"));
    println!("du/dx  = {ux}");

    let b = Binding::new().with_var("x", 0.3).with_var("y", 1.1);
    let uv = eval_numeric(&u, &b).expect("eval u");
    let uxv = eval_numeric(&ux, &b).expect("eval du/dx");
    println!("u(0.3, 1.1)     = {uv:.12}");
    println!("du/dx(0.3, 1.1) = {uxv:.12}");

    // d/dx picks up -cos(x) * u - 1 by the Leibniz rule; check numerically.
    let expected = -0.3f64.cos() * uv - 1.0;
    let err = (uxv - expected).abs();
    println!("leibniz residual = {err:.3e}");
    assert!(err < 1e-9, "Leibniz check failed: {err}");
    println!("ok");
}
