//! Shared builders for the systems exercised throughout the eds tests: jet
//! spaces, three hyperbolic equations in the plane, and an overdetermined
//! system in three independent variables. Each builder returns the chart
//! and/or the Pfaffian systems adapted to it.

use super::pfaffian::PfaffianSystem;
use crate::geometry::{Chart, ProbeConfig};
use crate::symcore::parse;

pub(crate) fn cfg() -> ProbeConfig {
    ProbeConfig::default()
}

/// First-order jet space of one function of one variable, with its contact
/// system prolonged once: coordinates (y, w, w_y, w_yy).
pub(crate) fn first_order_jet() -> (Chart, PfaffianSystem) {
    let m = Chart::new(&["y", "w", "w_y", "w_yy"]).unwrap();
    let k = PfaffianSystem::parse(&m, &["d(w) - w_y*d(y)", "d(w_y) - w_yy*d(y)"], &cfg()).unwrap();
    (m, k)
}

/// Second-order jet space of one function of one variable, prolonged once:
/// coordinates (x, v, v_x, v_xx, v_xxx).
pub(crate) fn second_order_jet() -> (Chart, PfaffianSystem) {
    let m = Chart::new(&["x", "v", "v_x", "v_xx", "v_xxx"]).unwrap();
    let k = PfaffianSystem::parse(
        &m,
        &[
            "d(v) - v_x*d(x)",
            "d(v_x) - v_xx*d(x)",
            "d(v_xx) - v_xxx*d(x)",
        ],
        &cfg(),
    )
    .unwrap();
    (m, k)
}

/// 7-dimensional chart for u_xy = u_x u_y / (u - x) with the second-order
/// jet coordinates and the loci needed by its adapted coframe removed.
pub(crate) fn hyperbolic_chart() -> Chart {
    Chart::new(&["x", "y", "u", "u_x", "u_y", "u_xx", "u_yy"])
        .unwrap()
        .nonzero(parse("u - x").unwrap())
        .nonzero(parse("u_x").unwrap())
        .nonzero(parse("u_y").unwrap())
}

pub(crate) fn hyperbolic_system(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(
        m,
        &[
            "d(u) - u_x*d(x) - u_y*d(y)",
            "d(u_x) - u_xx*d(x) - (u_x*u_y/(u - x))*d(y)",
            "d(u_y) - (u_x*u_y/(u - x))*d(x) - u_yy*d(y)",
        ],
        &cfg(),
    )
    .unwrap()
}

pub(crate) const HYPERBOLIC_PI_HAT: &str =
    "d(u_xx) - (u_xx/u_x)*d(u_x) - (u_x/(u - x)^2)*d(u) + (u_x/(u - x)^2)*d(x)";
pub(crate) const HYPERBOLIC_PI_CHECK: &str = "d(u_yy) - (u_yy/u_y)*d(u_y)";

fn extend(m: &Chart, base: &PfaffianSystem, extra: &[&str]) -> PfaffianSystem {
    let mut gens = base.generators().to_vec();
    for src in extra {
        gens.push(crate::geometry::parse_form(m, src).unwrap());
    }
    PfaffianSystem::new(m, gens, &cfg()).unwrap()
}

pub(crate) fn hyperbolic_hv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(x)", HYPERBOLIC_PI_HAT])
}

pub(crate) fn hyperbolic_cv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(y)", HYPERBOLIC_PI_CHECK])
}

/// The wave equation u_xy = 0 on the same style of 7-dimensional chart.
pub(crate) fn wave_chart() -> Chart {
    Chart::new(&["x", "y", "u", "u_x", "u_y", "u_xx", "u_yy"]).unwrap()
}

pub(crate) fn wave_system(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(
        m,
        &[
            "d(u) - u_x*d(x) - u_y*d(y)",
            "d(u_x) - u_xx*d(x)",
            "d(u_y) - u_yy*d(y)",
        ],
        &cfg(),
    )
    .unwrap()
}

pub(crate) fn wave_hv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(x)", "d(u_xx)"])
}

pub(crate) fn wave_cv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(y)", "d(u_yy)"])
}

/// u_xy = e^u on the 7-dimensional chart.
pub(crate) fn liouville_chart() -> Chart {
    Chart::new(&["x", "y", "u", "u_x", "u_y", "u_xx", "u_yy"]).unwrap()
}

pub(crate) fn liouville_system(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(
        m,
        &[
            "d(u) - u_x*d(x) - u_y*d(y)",
            "d(u_x) - u_xx*d(x) - exp(u)*d(y)",
            "d(u_y) - exp(u)*d(x) - u_yy*d(y)",
        ],
        &cfg(),
    )
    .unwrap()
}

pub(crate) fn liouville_hv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(x)", "d(u_xx) - exp(u)*u_x*d(y)"])
}

pub(crate) fn liouville_cv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(y)", "d(u_yy) - exp(u)*u_y*d(x)"])
}

/// The pair u_xz = 0, u_yz = 0 for u(x, y, z), on the 11-dimensional
/// manifold with the remaining second-order jets as coordinates.
pub(crate) fn separable_chart() -> Chart {
    Chart::new(&[
        "x", "y", "z", "u", "u_x", "u_y", "u_z", "u_xx", "u_xy", "u_yy", "u_zz",
    ])
    .unwrap()
}

pub(crate) fn separable_system(m: &Chart) -> PfaffianSystem {
    PfaffianSystem::parse(
        m,
        &[
            "d(u) - u_x*d(x) - u_y*d(y) - u_z*d(z)",
            "d(u_x) - u_xx*d(x) - u_xy*d(y)",
            "d(u_y) - u_xy*d(x) - u_yy*d(y)",
            "d(u_z) - u_zz*d(z)",
        ],
        &cfg(),
    )
    .unwrap()
}

pub(crate) fn separable_hv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(x)", "d(y)", "d(u_xx)", "d(u_xy)", "d(u_yy)"])
}

pub(crate) fn separable_cv(m: &Chart, i: &PfaffianSystem) -> PfaffianSystem {
    extend(m, i, &["d(z)", "d(u_zz)"])
}
