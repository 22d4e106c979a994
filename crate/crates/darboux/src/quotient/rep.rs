//! Quotient representations: the product of the factor charts, the direct
//! sum of the factor systems, the diagonal action, and the laws a quotient
//! map must satisfy, including descent of the singular systems and the
//! pushforward identity for annihilators.

use std::fmt;

use nalgebra::DMatrix;

use super::action::{system_annihilator, GroupAction, CONSTANTS_TOL};
use super::QuotientError;
use crate::eds::{require_constant, PfaffianSystem};
use crate::geometry::linalg::probe_for_chart;
use crate::geometry::rank::{generic_rank_rows, probe_bindings};
use crate::geometry::{
    same_chart, Chart, Constraint, DifferentialForm, GeomError, ProbeConfig, SmoothMap,
    VectorField,
};
use crate::symcore::{
    differentiate, eval_numeric, simplify, substitute, zero_probe, Binding, Expr, Substitution,
};

/// Sample count for the pointwise rank comparisons in
/// [`verify_annihilator_pushforward`].
const PUSHFORWARD_PROBES: usize = 10;

/// Product of the two factor charts; the coordinate sets must be disjoint.
pub fn product_chart(m1: &Chart, m2: &Chart) -> Result<Chart, QuotientError> {
    m1.product(m2).map_err(|e| match e {
        GeomError::DuplicateCoordinate(c) => QuotientError::SharedCoordinate(c),
        other => QuotientError::Geom(other),
    })
}

/// Projection from a product chart onto one factor.
pub(crate) fn factor_projection(product: &Chart, factor: &Chart) -> Result<SmoothMap, GeomError> {
    let names: Vec<&str> = factor.coords().iter().map(|s| s.as_str()).collect();
    SmoothMap::parse(product, factor, &names)
}

fn sum_on(
    product: &Chart,
    k1: &PfaffianSystem,
    k2: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<PfaffianSystem, QuotientError> {
    let p1 = factor_projection(product, k1.chart())?;
    let p2 = factor_projection(product, k2.chart())?;
    let mut gens = Vec::with_capacity(k1.rank() + k2.rank());
    for g in k1.generators() {
        gens.push(p1.pullback(g)?);
    }
    for g in k2.generators() {
        gens.push(p2.pullback(g)?);
    }
    Ok(PfaffianSystem::new(product, gens, cfg)?)
}

/// Direct sum of two Pfaffian systems, pulled back to the product of their
/// charts through the factor projections.
pub fn sum_system(
    k1: &PfaffianSystem,
    k2: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<PfaffianSystem, QuotientError> {
    let product = product_chart(k1.chart(), k2.chart())?;
    sum_on(&product, k1, k2, cfg)
}

/// A factor vector field viewed on the product chart.
fn lift_field(product: &Chart, x: &VectorField) -> Result<VectorField, GeomError> {
    let mut comps = vec![Expr::zero(); product.dim()];
    for (i, name) in x.chart().coords().iter().enumerate() {
        comps[product.index_of(name)?] = x.component(i).clone();
    }
    VectorField::new(product, &comps)
}

fn match_constants(left: &GroupAction, right: &GroupAction) -> Result<(), QuotientError> {
    let r = left.r();
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let (a, b) = (left.constants()[i][j][k], right.constants()[i][j][k]);
                if (a - b).abs() > CONSTANTS_TOL {
                    return Err(QuotientError::StructureMismatch {
                        i,
                        j,
                        k,
                        left: a,
                        right: b,
                    });
                }
            }
        }
    }
    Ok(())
}

/// A Pfaffian system presented as a quotient: two factor systems on
/// disjoint charts, actions of a common group on each factor, and a map
/// from the product chart onto the quotient chart that is invariant under
/// the diagonal action. Construction validates the group data (matching
/// structure constants, a well-defined diagonal algebra), the dimension
/// count, the absence of first integrals in each factor, and that the map
/// is a submersion. What the map does to the systems is checked separately
/// by [`verify_quotient_map`].
#[derive(Clone, Debug)]
pub struct QuotientRepresentation {
    k1: PfaffianSystem,
    k2: PfaffianSystem,
    action1: GroupAction,
    action2: GroupAction,
    product: Chart,
    sum: PfaffianSystem,
    diagonal: GroupAction,
    q: SmoothMap,
    projection1: Option<SmoothMap>,
    projection2: Option<SmoothMap>,
    factor_quotient1: Option<SmoothMap>,
    factor_quotient2: Option<SmoothMap>,
}

impl QuotientRepresentation {
    pub fn new(
        k1: &PfaffianSystem,
        k2: &PfaffianSystem,
        action1: &GroupAction,
        action2: &GroupAction,
        target: &Chart,
        q_components: &[Expr],
        cfg: &ProbeConfig,
    ) -> Result<QuotientRepresentation, QuotientError> {
        same_chart(k1.chart(), action1.chart())?;
        same_chart(k2.chart(), action2.chart())?;
        if action1.r() != action2.r() {
            return Err(QuotientError::GroupSizeMismatch {
                left: action1.r(),
                right: action2.r(),
            });
        }
        match_constants(action1, action2)?;
        let bare = product_chart(k1.chart(), k2.chart())?;
        // validate the components before transferring target constraints
        SmoothMap::new(&bare, target, q_components)?;
        let r = action1.r();
        if bare.dim() != target.dim() + r {
            return Err(QuotientError::DimensionMismatch {
                product: bare.dim(),
                r,
                target: target.dim(),
            });
        }
        // the target domain constraints hold upstairs along the map, so
        // pull them onto the product chart before probing anything there
        let mut su = Substitution::new();
        for (c, e) in target.coords().iter().zip(q_components) {
            su = su.var(c, e.clone());
        }
        let mut product = bare;
        for c in target.constraints() {
            let pulled = simplify(&substitute(c.expr(), &su));
            product = match c {
                Constraint::NonZero(_) => product.nonzero(pulled),
                Constraint::Positive(_) => product.positive(pulled),
            };
        }
        let q = SmoothMap::new(&product, target, q_components)?;
        for k in [k1, k2] {
            let retained = k.infinity(cfg)?.rank();
            if retained != 0 {
                return Err(QuotientError::FactorNotIntegrable { rank: retained });
            }
        }
        let sum = sum_on(&product, k1, k2, cfg)?;
        let mut diag = Vec::with_capacity(r);
        for a in 0..r {
            let x = lift_field(&product, action1.generator(a))?;
            let y = lift_field(&product, action2.generator(a))?;
            diag.push(x.add(&y)?);
        }
        let diagonal = GroupAction::new(&product, &diag, cfg)?;
        match_constants(action1, &diagonal)?;
        // a quotient map must be a submersion onto the target
        let rows: Vec<Vec<Expr>> = q
            .exprs()
            .iter()
            .map(|e| product.coords().iter().map(|c| differentiate(e, c)).collect())
            .collect();
        let rank = require_constant(&generic_rank_rows(&product, &rows, cfg)?)?;
        if rank != target.dim() {
            return Err(QuotientError::NotSubmersion {
                rank,
                dim: target.dim(),
            });
        }
        Ok(QuotientRepresentation {
            k1: k1.clone(),
            k2: k2.clone(),
            action1: action1.clone(),
            action2: action2.clone(),
            product,
            sum,
            diagonal,
            q,
            projection1: None,
            projection2: None,
            factor_quotient1: None,
            factor_quotient2: None,
        })
    }

    /// Parses the quotient map components against the bare product chart.
    pub fn parse(
        k1: &PfaffianSystem,
        k2: &PfaffianSystem,
        action1: &GroupAction,
        action2: &GroupAction,
        target: &Chart,
        srcs: &[&str],
        cfg: &ProbeConfig,
    ) -> Result<QuotientRepresentation, QuotientError> {
        let bare = product_chart(k1.chart(), k2.chart())?;
        let comps = srcs
            .iter()
            .map(|s| bare.parse_expr(s))
            .collect::<Result<Vec<_>, _>>()?;
        QuotientRepresentation::new(k1, k2, action1, action2, target, &comps, cfg)
    }

    /// Attaches maps out of the quotient chart that present points of the
    /// quotient as data on lower-dimensional charts, as used by solution
    /// methods. Sources must be the quotient chart.
    pub fn with_projections(
        mut self,
        p1: SmoothMap,
        p2: SmoothMap,
    ) -> Result<QuotientRepresentation, QuotientError> {
        same_chart(self.q.target(), p1.source())?;
        same_chart(self.q.target(), p2.source())?;
        self.projection1 = Some(p1);
        self.projection2 = Some(p2);
        Ok(self)
    }

    /// Attaches the invariant maps of the factor actions. Sources must be
    /// the factor charts.
    pub fn with_factor_quotients(
        mut self,
        q1: SmoothMap,
        q2: SmoothMap,
    ) -> Result<QuotientRepresentation, QuotientError> {
        same_chart(self.k1.chart(), q1.source())?;
        same_chart(self.k2.chart(), q2.source())?;
        self.factor_quotient1 = Some(q1);
        self.factor_quotient2 = Some(q2);
        Ok(self)
    }

    pub fn k1(&self) -> &PfaffianSystem {
        &self.k1
    }

    pub fn k2(&self) -> &PfaffianSystem {
        &self.k2
    }

    pub fn action1(&self) -> &GroupAction {
        &self.action1
    }

    pub fn action2(&self) -> &GroupAction {
        &self.action2
    }

    /// The diagonal action on the product chart.
    pub fn diagonal(&self) -> &GroupAction {
        &self.diagonal
    }

    pub fn product(&self) -> &Chart {
        &self.product
    }

    /// The direct sum of the factor systems on the product chart.
    pub fn sum(&self) -> &PfaffianSystem {
        &self.sum
    }

    /// The quotient map from the product chart onto the quotient chart.
    pub fn q(&self) -> &SmoothMap {
        &self.q
    }

    /// Dimension of the common group.
    pub fn r(&self) -> usize {
        self.action1.r()
    }

    pub fn projection1(&self) -> Option<&SmoothMap> {
        self.projection1.as_ref()
    }

    pub fn projection2(&self) -> Option<&SmoothMap> {
        self.projection2.as_ref()
    }

    pub fn factor_quotient1(&self) -> Option<&SmoothMap> {
        self.factor_quotient1.as_ref()
    }

    pub fn factor_quotient2(&self) -> Option<&SmoothMap> {
        self.factor_quotient2.as_ref()
    }

    /// The first factor system plus the full cotangent space of the second
    /// factor, on the product chart: the lift of the first singular system
    /// of the quotient.
    pub fn hat_singular_lift(&self, cfg: &ProbeConfig) -> Result<PfaffianSystem, QuotientError> {
        let p1 = factor_projection(&self.product, self.k1.chart())?;
        let mut gens = Vec::new();
        for g in self.k1.generators() {
            gens.push(p1.pullback(g)?);
        }
        for c in self.k2.chart().coords() {
            gens.push(DifferentialForm::differential(&self.product, c)?);
        }
        Ok(PfaffianSystem::new(&self.product, gens, cfg)?)
    }

    /// The second factor system plus the full cotangent space of the first
    /// factor: the lift of the other singular system.
    pub fn check_singular_lift(&self, cfg: &ProbeConfig) -> Result<PfaffianSystem, QuotientError> {
        let p2 = factor_projection(&self.product, self.k2.chart())?;
        let mut gens = Vec::new();
        for c in self.k1.chart().coords() {
            gens.push(DifferentialForm::differential(&self.product, c)?);
        }
        for g in self.k2.generators() {
            gens.push(p2.pullback(g)?);
        }
        Ok(PfaffianSystem::new(&self.product, gens, cfg)?)
    }
}

/// Outcome of checking a quotient system against a representation: every
/// generator pulls back into the sum, the ranks differ by the group
/// dimension, and the map is invariant under the diagonal action.
#[derive(Clone, Debug)]
pub struct QuotientMapReport {
    /// Every generator of the quotient system pulls back into the sum.
    pub pullbacks_in_sum: bool,
    /// Indices of quotient generators whose pullback leaves the sum.
    pub failing_pullbacks: Vec<usize>,
    /// rank of the quotient system = rank of the sum - group dimension.
    pub rank_identity: bool,
    pub rank_system: usize,
    pub rank_sum: usize,
    pub group_dim: usize,
    /// The map is constant along every diagonal generator.
    pub invariant: bool,
    /// (generator, component) pairs where invariance fails.
    pub failing_invariance: Vec<(usize, usize)>,
}

impl QuotientMapReport {
    pub fn passed(&self) -> bool {
        self.pullbacks_in_sum && self.rank_identity && self.invariant
    }
}

impl fmt::Display for QuotientMapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "ok" } else { "FAILED" };
        writeln!(
            f,
            "generators pull back into the sum: {}{}",
            verdict(self.pullbacks_in_sum),
            if self.failing_pullbacks.is_empty() {
                String::new()
            } else {
                format!(" (generators {:?})", self.failing_pullbacks)
            }
        )?;
        writeln!(
            f,
            "rank identity {} = {} - {}: {}",
            self.rank_system,
            self.rank_sum,
            self.group_dim,
            verdict(self.rank_identity)
        )?;
        write!(
            f,
            "map invariant under the diagonal action: {}{}",
            verdict(self.invariant),
            if self.failing_invariance.is_empty() {
                String::new()
            } else {
                format!(" (generator, component pairs {:?})", self.failing_invariance)
            }
        )
    }
}

/// Checks the quotient-map laws of a representation against the system it
/// is meant to represent.
pub fn verify_quotient_map(
    rep: &QuotientRepresentation,
    system: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<QuotientMapReport, QuotientError> {
    same_chart(rep.q().target(), system.chart())?;
    let mut failing_pullbacks = Vec::new();
    for (idx, g) in system.generators().iter().enumerate() {
        if !rep.sum().contains_form(&rep.q().pullback(g)?, cfg)? {
            failing_pullbacks.push(idx);
        }
    }
    let rank_system = system.rank();
    let rank_sum = rep.sum().rank();
    let group_dim = rep.r();
    let po = probe_for_chart(rep.product(), cfg);
    let mut failing_invariance = Vec::new();
    for (a, x) in rep.diagonal().generators().iter().enumerate() {
        for (j, e) in rep.q().exprs().iter().enumerate() {
            if !zero_probe(&simplify(&x.apply(e)), &po) {
                failing_invariance.push((a, j));
            }
        }
    }
    Ok(QuotientMapReport {
        pullbacks_in_sum: failing_pullbacks.is_empty(),
        failing_pullbacks,
        rank_identity: rank_system + group_dim == rank_sum,
        rank_system,
        rank_sum,
        group_dim,
        invariant: failing_invariance.is_empty(),
        failing_invariance,
    })
}

/// Whether the given singular pair of the quotient system lifts into the
/// corresponding singular systems upstairs: each generator pulls back into
/// the lift, and the ranks differ exactly by the group dimension.
pub fn verify_singular_correspondence(
    rep: &QuotientRepresentation,
    hv: &PfaffianSystem,
    cv: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<bool, QuotientError> {
    same_chart(rep.q().target(), hv.chart())?;
    same_chart(rep.q().target(), cv.chart())?;
    let hw = rep.hat_singular_lift(cfg)?;
    let cw = rep.check_singular_lift(cfg)?;
    for g in hv.generators() {
        if !hw.contains_form(&rep.q().pullback(g)?, cfg)? {
            return Ok(false);
        }
    }
    for g in cv.generators() {
        if !cw.contains_form(&rep.q().pullback(g)?, cfg)? {
            return Ok(false);
        }
    }
    Ok(hv.rank() + rep.r() == hw.rank() && cv.rank() + rep.r() == cw.rank())
}

fn eval_row(row: &[Expr], b: &Binding) -> Result<Vec<f64>, GeomError> {
    row.iter()
        .map(|e| eval_numeric(e, b).map_err(|err| GeomError::ProbeEval(err.to_string())))
        .collect()
}

fn numeric_rank(rows: &[Vec<f64>], svd_tol: f64) -> usize {
    // rank is invariant under row scaling; normalizing each row keeps the
    // relative tolerance meaningful when the magnitudes differ wildly
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .filter_map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            (n > 0.0).then(|| r.iter().map(|v| v / n).collect())
        })
        .collect();
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|s| **s > svd_tol * smax)
        .count()
}

/// Whether the quotient map pushes the annihilator of `upstairs` forward
/// onto the annihilator of `downstairs`: at sampled points, the image of
/// ann(upstairs) under the differential of the map, the annihilator
/// downstairs, and their union all have equal rank.
pub fn verify_annihilator_pushforward(
    rep: &QuotientRepresentation,
    upstairs: &PfaffianSystem,
    downstairs: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<bool, QuotientError> {
    same_chart(rep.product(), upstairs.chart())?;
    same_chart(rep.q().target(), downstairs.chart())?;
    let ann_up = system_annihilator(upstairs, cfg)?;
    let ann_down = system_annihilator(downstairs, cfg)?;
    let product = rep.product();
    let jac: Vec<Vec<Expr>> = rep
        .q()
        .exprs()
        .iter()
        .map(|e| product.coords().iter().map(|c| differentiate(e, c)).collect())
        .collect();
    let pulled: Vec<Vec<Expr>> = ann_down
        .iter()
        .map(|f| {
            f.components()
                .iter()
                .map(|e| rep.q().pullback_scalar(e))
                .collect()
        })
        .collect();
    let mut exprs: Vec<Expr> = jac.iter().flatten().cloned().collect();
    exprs.extend(pulled.iter().flatten().cloned());
    for f in &ann_up {
        exprs.extend(f.components().iter().cloned());
    }
    let probe_cfg = ProbeConfig {
        samples: PUSHFORWARD_PROBES,
        ..cfg.clone()
    };
    let bindings = probe_bindings(product, &exprs, &probe_cfg)?;
    for b in &bindings {
        let jac_n: Vec<Vec<f64>> = jac
            .iter()
            .map(|row| eval_row(row, b))
            .collect::<Result<_, _>>()?;
        let mut pushed: Vec<Vec<f64>> = Vec::with_capacity(ann_up.len());
        for fld in &ann_up {
            let x = eval_row(fld.components(), b)?;
            pushed.push(
                jac_n
                    .iter()
                    .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                    .collect(),
            );
        }
        let down: Vec<Vec<f64>> = pulled
            .iter()
            .map(|row| eval_row(row, b))
            .collect::<Result<_, _>>()?;
        let rank_pushed = numeric_rank(&pushed, cfg.svd_tol);
        let rank_down = numeric_rank(&down, cfg.svd_tol);
        let stacked: Vec<Vec<f64>> = pushed.iter().chain(down.iter()).cloned().collect();
        if rank_pushed != rank_down || numeric_rank(&stacked, cfg.svd_tol) != rank_pushed {
            return Ok(false);
        }
    }
    Ok(true)
}
