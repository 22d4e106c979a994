//! Builders for the quotient representations exercised across the quotient
//! tests: the hyperbolic equation u_xy = u_x u_y/(u - x) as a quotient by a
//! solvable two-dimensional group, the pair u_xz = u_yz = 0 as a quotient
//! by a translation group, and u_xy = e^u as a quotient by the prolonged
//! Mobius action.

use super::action::GroupAction;
use super::rep::QuotientRepresentation;
pub(crate) use crate::eds::fixtures::cfg;
use crate::eds::fixtures::{hyperbolic_chart, liouville_chart, separable_chart};
use crate::eds::PfaffianSystem;
use crate::geometry::{Chart, VectorField};
use crate::symcore::{parse, Expr};

/// Contact system on a 5-coordinate jet chart ordered (independent,
/// dependent, first, second, third derivative).
pub(crate) fn second_jet_contact(m: &Chart) -> PfaffianSystem {
    let c = m.coords();
    let gens: Vec<String> = (1..4)
        .map(|k| format!("d({}) - {}*d({})", c[k], c[k + 1], c[0]))
        .collect();
    let srcs: Vec<&str> = gens.iter().map(|s| s.as_str()).collect();
    PfaffianSystem::parse(m, &srcs, &cfg()).unwrap()
}

/// The field that scales each listed coordinate by its own value.
fn scaling(m: &Chart, coords: &[&str]) -> VectorField {
    let pairs: Vec<(&str, Expr)> = coords
        .iter()
        .map(|c| (*c, m.parse_expr(c).unwrap()))
        .collect();
    VectorField::from_pairs(m, &pairs).unwrap()
}

/// The Mobius algebra of the dependent variable, prolonged to third order:
/// translation, scaling, and the quadratic field. A negative sign flips the
/// odd generators, which leaves the structure constants unchanged and makes
/// the diagonal of two opposite copies act on sums and ratios.
pub(crate) fn sl2_prolonged(m: &Chart, dep: &str, indep: &str, sign: i64) -> GroupAction {
    let d1 = format!("{dep}_{indep}");
    let d2 = format!("{dep}_{indep}{indep}");
    let d3 = format!("{dep}_{indep}{indep}{indep}");
    let e = |src: &str| m.parse_expr(src).unwrap();
    let translation = VectorField::from_pairs(m, &[(dep, Expr::one())]).unwrap();
    let scale = scaling(m, &[dep, &d1, &d2, &d3]);
    let quadratic = VectorField::from_pairs(
        m,
        &[
            (dep, e(&format!("{dep}^2"))),
            (&d1, e(&format!("2*{dep}*{d1}"))),
            (&d2, e(&format!("2*{d1}^2 + 2*{dep}*{d2}"))),
            (&d3, e(&format!("6*{d1}*{d2} + 2*{dep}*{d3}"))),
        ],
    )
    .unwrap();
    let (translation, quadratic) = if sign < 0 {
        (translation.neg(), quadratic.neg())
    } else {
        (translation, quadratic)
    };
    GroupAction::new(m, &[translation, scale, quadratic], &cfg()).unwrap()
}

pub(crate) fn ex1_m1() -> Chart {
    Chart::new(&["y", "w", "w_y", "w_yy"])
        .unwrap()
        .positive(parse("w_y").unwrap())
}

pub(crate) fn ex1_m2() -> Chart {
    Chart::new(&["x", "v", "v_x", "v_xx", "v_xxx"])
        .unwrap()
        .positive(parse("v_x").unwrap())
}

pub(crate) fn ex1_k1(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(m, &["d(w) - w_y*d(y)", "d(w_y) - w_yy*d(y)"], &cfg()).unwrap()
}

pub(crate) fn ex1_k2(m: &Chart) -> PfaffianSystem {
    second_jet_contact(m)
}

/// Scaling and translation of the dependent variable on the first factor;
/// the translation points opposite to [`ex1_action2`] so the diagonal
/// preserves v + w.
pub(crate) fn ex1_action1(m: &Chart) -> GroupAction {
    let scale = scaling(m, &["w", "w_y", "w_yy"]);
    let shift = VectorField::coordinate(m, "w").unwrap().neg();
    GroupAction::new(m, &[scale, shift], &cfg()).unwrap()
}

pub(crate) fn ex1_action2(m: &Chart) -> GroupAction {
    let scale = scaling(m, &["v", "v_x", "v_xx", "v_xxx"]);
    let shift = VectorField::coordinate(m, "v").unwrap();
    GroupAction::new(m, &[scale, shift], &cfg()).unwrap()
}

/// Quotient map components in the order of [`hyperbolic_chart`]:
/// (x, y, u, u_x, u_y, u_xx, u_yy).
pub(crate) const EX1_Q: [&str; 7] = [
    "x",
    "y",
    "x - (v + w)/v_x",
    "(v + w)*v_xx/v_x^2",
    "-w_y/v_x",
    "v_xx/v_x + (v + w)*v_xxx/v_x^2 - 2*(v + w)*v_xx^2/v_x^3",
    "-w_yy/v_x",
];

pub(crate) fn ex1_rep() -> QuotientRepresentation {
    let m1 = ex1_m1();
    let m2 = ex1_m2();
    QuotientRepresentation::parse(
        &ex1_k1(&m1),
        &ex1_k2(&m2),
        &ex1_action1(&m1),
        &ex1_action2(&m2),
        &hyperbolic_chart(),
        &EX1_Q,
        &cfg(),
    )
    .unwrap()
}

pub(crate) fn ex3_m1() -> Chart {
    Chart::new(&["z", "w", "w_z", "w_zz"]).unwrap()
}

pub(crate) fn ex3_m2() -> Chart {
    Chart::new(&["x", "y", "v", "v_x", "v_y", "v_xx", "v_xy", "v_yy"]).unwrap()
}

pub(crate) fn ex3_k1(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(m, &["d(w) - w_z*d(z)", "d(w_z) - w_zz*d(z)"], &cfg()).unwrap()
}

pub(crate) fn ex3_k2(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(
        m,
        &[
            "d(v) - v_x*d(x) - v_y*d(y)",
            "d(v_x) - v_xx*d(x) - v_xy*d(y)",
            "d(v_y) - v_xy*d(x) - v_yy*d(y)",
        ],
        &cfg(),
    )
    .unwrap()
}

/// Quotient of the two contact systems by opposite translations, with
/// u = w + v split across the factors; components in the order of
/// [`separable_chart`].
pub(crate) fn ex3_rep() -> QuotientRepresentation {
    let m1 = ex3_m1();
    let m2 = ex3_m2();
    let a1 = GroupAction::new(
        &m1,
        &[VectorField::coordinate(&m1, "w").unwrap()],
        &cfg(),
    )
    .unwrap();
    let a2 = GroupAction::new(
        &m2,
        &[VectorField::coordinate(&m2, "v").unwrap().neg()],
        &cfg(),
    )
    .unwrap();
    QuotientRepresentation::parse(
        &ex3_k1(&m1),
        &ex3_k2(&m2),
        &a1,
        &a2,
        &separable_chart(),
        &[
            "x", "y", "z", "w + v", "v_x", "v_y", "w_z", "v_xx", "v_xy", "v_yy", "w_zz",
        ],
        &cfg(),
    )
    .unwrap()
}

pub(crate) fn liouville_m1() -> Chart {
    Chart::new(&["y", "w", "w_y", "w_yy", "w_yyy"])
        .unwrap()
        .positive(parse("w").unwrap())
        .positive(parse("w_y").unwrap())
}

pub(crate) fn liouville_m2() -> Chart {
    Chart::new(&["x", "v", "v_x", "v_xx", "v_xxx"])
        .unwrap()
        .positive(parse("v").unwrap())
        .positive(parse("v_x").unwrap())
}

/// Quotient map components in the order of [`liouville_chart`]: the
/// classical closed-form solution u = log(2 w_y v_x/(v + w)^2) and its
/// derivative coordinates.
pub(crate) const LIOUVILLE_Q: [&str; 7] = [
    "x",
    "y",
    "log(2*w_y*v_x/(v + w)^2)",
    "v_xx/v_x - 2*v_x/(v + w)",
    "w_yy/w_y - 2*w_y/(v + w)",
    "v_xxx/v_x - v_xx^2/v_x^2 - 2*v_xx/(v + w) + 2*v_x^2/(v + w)^2",
    "w_yyy/w_y - w_yy^2/w_y^2 - 2*w_yy/(v + w) + 2*w_y^2/(v + w)^2",
];

pub(crate) fn liouville_rep() -> QuotientRepresentation {
    let m1 = liouville_m1();
    let m2 = liouville_m2();
    QuotientRepresentation::parse(
        &second_jet_contact(&m1),
        &second_jet_contact(&m2),
        &sl2_prolonged(&m1, "w", "y", 1),
        &sl2_prolonged(&m2, "v", "x", -1),
        &liouville_chart(),
        &LIOUVILLE_Q,
        &cfg(),
    )
    .unwrap()
}
