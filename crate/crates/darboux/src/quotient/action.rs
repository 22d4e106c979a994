//! Lie algebras of infinitesimal generators on a chart: bracket closure
//! with exact structure constants, solvability by the derived series, and
//! the infinitesimal symmetry and transversality criteria.

use nalgebra::DMatrix;

use super::QuotientError;
use crate::eds::{require_constant, PfaffianSystem};
use crate::geometry::linalg::probe_for_chart;
use crate::geometry::{
    annihilator, generic_rank_fields, same_chart, Chart, GeomError, ProbeConfig, SymMat,
    VectorField,
};
use crate::symcore::{eval_numeric, simplify, zero_probe, Binding, Expr};

/// Tolerance for the Jacobi identity and for comparing structure constants
/// between actions of the same abstract group.
pub(crate) const CONSTANTS_TOL: f64 = 1e-10;

/// A finite-dimensional Lie algebra of vector fields: the infinitesimal
/// generators of a group action on a chart. Construction expands every
/// bracket in the generator basis, requiring exact constant coefficients,
/// and derives solvability from the resulting structure constants.
#[derive(Clone, Debug)]
pub struct GroupAction {
    chart: Chart,
    generators: Vec<VectorField>,
    /// constants[i][j][k]: the coefficient of generator k in [X_i, X_j].
    constants: Vec<Vec<Vec<f64>>>,
    solvable: bool,
}

impl GroupAction {
    pub fn new(
        chart: &Chart,
        generators: &[VectorField],
        cfg: &ProbeConfig,
    ) -> Result<GroupAction, QuotientError> {
        for g in generators {
            same_chart(chart, g.chart())?;
        }
        let r = generators.len();
        if r > 0 {
            let rank = require_constant(&generic_rank_fields(generators, cfg)?)?;
            if rank != r {
                return Err(QuotientError::DependentGenerators { rank, expected: r });
            }
        }
        // columns of a are the generators; solving a*x = [X_i, X_j] expands
        // the bracket in the generator basis
        let rows: Vec<Vec<Expr>> = (0..chart.dim())
            .map(|c| generators.iter().map(|g| g.component(c).clone()).collect())
            .collect();
        let a = SymMat::from_rows(&rows);
        let po = probe_for_chart(chart, cfg);
        let mut constants = vec![vec![vec![0.0; r]; r]; r];
        for i in 0..r {
            for j in (i + 1)..r {
                let b = generators[i].bracket(&generators[j])?;
                let Some(x) = a.solve(b.components(), &po) else {
                    return Err(QuotientError::NotClosed { i, j });
                };
                for c in 0..chart.dim() {
                    let mut residual = b.component(c).clone();
                    for (k, xk) in x.iter().enumerate() {
                        residual = residual - xk.clone() * generators[k].component(c).clone();
                    }
                    if !zero_probe(&simplify(&residual), &po) {
                        return Err(QuotientError::NotClosed { i, j });
                    }
                }
                for (k, xk) in x.iter().enumerate() {
                    let v = match eval_numeric(xk, &Binding::new()) {
                        Ok(v) => v,
                        Err(_) => {
                            return Err(QuotientError::NotConstant {
                                i,
                                j,
                                k,
                                value: xk.to_string(),
                            })
                        }
                    };
                    constants[i][j][k] = v;
                    constants[j][i][k] = -v;
                }
            }
        }
        check_jacobi(&constants, r)?;
        let solvable = solvable_from_constants(&constants, r);
        Ok(GroupAction {
            chart: chart.clone(),
            generators: generators.to_vec(),
            constants,
            solvable,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Dimension of the abstract group.
    pub fn r(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &VectorField {
        &self.generators[i]
    }

    /// constants[i][j][k]: the coefficient of generator k in [X_i, X_j].
    pub fn constants(&self) -> &[Vec<Vec<f64>>] {
        &self.constants
    }

    /// Whether the derived series of the structure-constant Lie algebra
    /// terminates at zero.
    pub fn is_solvable(&self) -> bool {
        self.solvable
    }
}

fn check_jacobi(c: &[Vec<Vec<f64>>], r: usize) -> Result<(), QuotientError> {
    for i in 0..r {
        for j in (i + 1)..r {
            for k in (j + 1)..r {
                for m in 0..r {
                    let s: f64 = (0..r)
                        .map(|l| {
                            c[j][k][l] * c[i][l][m]
                                + c[k][i][l] * c[j][l][m]
                                + c[i][j][l] * c[k][l][m]
                        })
                        .sum();
                    if s.abs() > CONSTANTS_TOL {
                        return Err(QuotientError::Jacobi {
                            i,
                            j,
                            k,
                            residual: s.abs(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Whether the derived series g ⊇ [g,g] ⊇ [[g,g],[g,g]] ⊇ ... reaches zero.
fn solvable_from_constants(c: &[Vec<Vec<f64>>], r: usize) -> bool {
    if r == 0 {
        return true;
    }
    let mut basis: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut v = vec![0.0; r];
            v[i] = 1.0;
            v
        })
        .collect();
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for a in &basis {
            for b in &basis {
                let mut w = vec![0.0; r];
                for (i, ai) in a.iter().enumerate() {
                    if *ai == 0.0 {
                        continue;
                    }
                    for (j, bj) in b.iter().enumerate() {
                        if *bj == 0.0 {
                            continue;
                        }
                        for (k, wk) in w.iter_mut().enumerate() {
                            *wk += ai * bj * c[i][j][k];
                        }
                    }
                }
                if w.iter().any(|x| x.abs() > CONSTANTS_TOL) {
                    rows.push(w);
                }
            }
        }
        if rows.is_empty() {
            return true;
        }
        let next = row_space_basis(&rows);
        if next.len() >= basis.len() {
            return false;
        }
        basis = next;
    }
}

/// Orthonormal basis of the row space, from the right singular vectors.
fn row_space_basis(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let r = rows[0].len();
    let m = DMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let vt = svd.v_t.as_ref().expect("svd requested right vectors");
    let mut out = Vec::new();
    for (idx, s) in svd.singular_values.iter().enumerate() {
        if *s > CONSTANTS_TOL * smax.max(1.0) {
            out.push((0..r).map(|j| vt[(idx, j)]).collect());
        }
    }
    out
}

/// Vector fields spanning the annihilator of the system, treating a rank-0
/// system as annihilated by the whole tangent space.
pub(crate) fn system_annihilator(
    sys: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<Vec<VectorField>, GeomError> {
    if sys.rank() == 0 {
        return sys
            .chart()
            .coords()
            .iter()
            .map(|c| VectorField::coordinate(sys.chart(), c))
            .collect();
    }
    annihilator(sys.generators(), cfg)
}

/// Whether every generator of the action preserves the span of the system:
/// the Lie derivative of each system generator along each infinitesimal
/// generator stays inside the span.
pub fn verify_symmetry(
    action: &GroupAction,
    k: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<bool, QuotientError> {
    same_chart(action.chart(), k.chart())?;
    for x in action.generators() {
        for theta in k.generators() {
            if !k.contains_form(&theta.lie_derivative(x)?, cfg)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Whether the generator span meets the annihilator of the system only in
/// zero at generic points: the union of the generators and the annihilator
/// must have rank r + (dim - rank I).
pub fn verify_transversality(
    action: &GroupAction,
    i: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<bool, QuotientError> {
    same_chart(action.chart(), i.chart())?;
    let mut fields = action.generators().to_vec();
    fields.extend(system_annihilator(i, cfg)?);
    let rank = require_constant(&generic_rank_fields(&fields, cfg)?)?;
    Ok(rank == action.r() + (i.chart().dim() - i.rank()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::fixtures::{
        cfg, ex1_action1, ex1_action2, ex1_k1, ex1_m1, ex1_m2, liouville_m1, second_jet_contact,
        sl2_prolonged,
    };
    use crate::symcore::parse;

    #[test]
    fn structure_constants_are_exact() {
        let m1 = ex1_m1();
        let a = ex1_action1(&m1);
        assert_eq!(a.r(), 2);
        // [scaling, translation] = -translation
        assert_eq!(a.constants()[0][1], vec![0.0, -1.0]);
        assert_eq!(a.constants()[1][0], vec![0.0, 1.0]);
        assert!(a.is_solvable());
        let m2 = ex1_m2();
        let b = ex1_action2(&m2);
        assert_eq!(b.constants(), a.constants());
    }

    #[test]
    fn abelian_translations_are_solvable() {
        let m = Chart::new(&["t", "w", "v", "v_t", "v_tt"]).unwrap();
        let gens = [
            VectorField::coordinate(&m, "w").unwrap(),
            VectorField::coordinate(&m, "v").unwrap(),
            VectorField::from_pairs(&m, &[("v", parse("t").unwrap()), ("v_t", Expr::one())])
                .unwrap(),
        ];
        let a = GroupAction::new(&m, &gens, &cfg()).unwrap();
        assert!(a.constants().iter().flatten().flatten().all(|c| *c == 0.0));
        assert!(a.is_solvable());
    }

    #[test]
    fn prolonged_mobius_action_is_not_solvable() {
        let m = liouville_m1();
        let a = sl2_prolonged(&m, "w", "y", 1);
        assert_eq!(a.r(), 3);
        // [e1, e2] = e1, [e1, e3] = 2 e2, [e2, e3] = e3
        assert_eq!(a.constants()[0][1], vec![1.0, 0.0, 0.0]);
        assert_eq!(a.constants()[0][2], vec![0.0, 2.0, 0.0]);
        assert_eq!(a.constants()[1][2], vec![0.0, 0.0, 1.0]);
        assert!(!a.is_solvable());
    }

    #[test]
    fn brackets_must_close_on_the_span() {
        let m = Chart::new(&["x", "y", "z"])
            .unwrap()
            .nonzero(parse("x").unwrap());
        let gens = [
            VectorField::coordinate(&m, "x").unwrap(),
            VectorField::from_pairs(&m, &[("y", parse("x").unwrap()), ("z", parse("y").unwrap())])
                .unwrap(),
        ];
        assert!(matches!(
            GroupAction::new(&m, &gens, &cfg()),
            Err(QuotientError::NotClosed { i: 0, j: 1 })
        ));
    }

    #[test]
    fn non_constant_expansions_are_rejected() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let gens = [
            VectorField::coordinate(&m, "x").unwrap(),
            VectorField::from_pairs(&m, &[("y", parse("1 + x^2").unwrap())]).unwrap(),
        ];
        assert!(matches!(
            GroupAction::new(&m, &gens, &cfg()),
            Err(QuotientError::NotConstant { i: 0, j: 1, k: 1, .. })
        ));
    }

    #[test]
    fn dependent_generators_are_rejected() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let gens = [
            VectorField::coordinate(&m, "x").unwrap(),
            VectorField::coordinate(&m, "x").unwrap().scale(&parse("2").unwrap()),
        ];
        assert!(matches!(
            GroupAction::new(&m, &gens, &cfg()),
            Err(QuotientError::DependentGenerators { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn symmetry_criterion_on_contact_systems() {
        let m1 = ex1_m1();
        let k1 = ex1_k1(&m1);
        assert!(verify_symmetry(&ex1_action1(&m1), &k1, &cfg()).unwrap());

        // the full prolonged Mobius algebra preserves the contact system
        let j3 = liouville_m1();
        let contact = PfaffianSystem::parse(
            &j3,
            &[
                "d(w) - w_y*d(y)",
                "d(w_y) - w_yy*d(y)",
                "d(w_yy) - w_yyy*d(y)",
            ],
            &cfg(),
        )
        .unwrap();
        assert!(verify_symmetry(&sl2_prolonged(&j3, "w", "y", 1), &contact, &cfg()).unwrap());

        // w d/dy shears the independent variable and breaks the span
        let m = Chart::new(&["y", "w", "w_y"]).unwrap();
        let k = PfaffianSystem::parse(&m, &["d(w) - w_y*d(y)"], &cfg()).unwrap();
        let shear =
            VectorField::from_pairs(&m, &[("y", parse("w").unwrap())]).unwrap();
        let a = GroupAction::new(&m, &[shear], &cfg()).unwrap();
        assert!(!verify_symmetry(&a, &k, &cfg()).unwrap());
    }

    #[test]
    fn transversality_counts_ranks() {
        // the solvable action meets ann(K2') in zero: 2 + (5 - 2) = 5
        let m2 = ex1_m2();
        let a2 = ex1_action2(&m2);
        let derived = second_jet_contact(&m2).derived(&cfg()).unwrap();
        assert_eq!(derived.rank(), 2);
        assert!(verify_transversality(&a2, &derived, &cfg()).unwrap());

        // a 3-dimensional algebra cannot act transversally to a rank-2
        // system on a 5-dimensional chart
        let j3 = Chart::new(&["x", "v", "v_x", "v_xx", "v_xxx"])
            .unwrap()
            .positive(parse("v").unwrap())
            .positive(parse("v_x").unwrap());
        let sl2 = sl2_prolonged(&j3, "v", "x", 1);
        let derived = second_jet_contact(&j3).derived(&cfg()).unwrap();
        assert!(!verify_transversality(&sl2, &derived, &cfg()).unwrap());

        // a full-rank system is annihilated only by zero, so any action is
        // transverse to it
        let m1 = ex1_m1();
        let full = PfaffianSystem::parse(
            &m1,
            &["d(y)", "d(w)", "d(w_y)", "d(w_yy)"],
            &cfg(),
        )
        .unwrap();
        assert!(verify_transversality(&ex1_action1(&m1), &full, &cfg()).unwrap());
    }
}
