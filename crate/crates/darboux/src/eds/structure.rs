//! Structure-equation classification against an adapted coframe, and the
//! Darboux integrability test built on the singular systems it produces.
//!
//! The coframe splits into a theta block spanning the system under study
//! and four transverse blocks. Expanding each d(theta) over the coframe
//! basis and discarding theta-involving products leaves the torsion; the
//! classifier recognizes the class-s hyperbolic pattern (one hat product,
//! one check product, the remaining rows closed) and its block
//! generalization, and assembles the singular pair (hV, cV) whose derived
//! flags decide integrability by rank counting.

use super::pfaffian::{combined_rank, require_constant, PfaffianSystem};
use super::EdsError;
use crate::geometry::linalg::{probe_for_chart, SymMat};
use crate::geometry::{parse_form, same_chart, Chart, DifferentialForm, GeomError, ProbeConfig};
use crate::symcore::{simplify, zero_probe, Expr};
use std::fmt;

/// A full coframe adapted to a Pfaffian system: a theta block spanning the
/// system and four nonempty transverse blocks. The blocks are ordered
/// theta, hat omega, hat tau, check omega, check tau, and together must
/// have constant generic rank equal to the chart dimension.
#[derive(Clone, Debug)]
pub struct Coframe {
    chart: Chart,
    theta: Vec<DifferentialForm>,
    hat_omega: Vec<DifferentialForm>,
    hat_tau: Vec<DifferentialForm>,
    check_omega: Vec<DifferentialForm>,
    check_tau: Vec<DifferentialForm>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Theta,
    HatOmega,
    HatTau,
    CheckOmega,
    CheckTau,
}

impl Coframe {
    pub fn new(
        chart: &Chart,
        theta: Vec<DifferentialForm>,
        hat_omega: Vec<DifferentialForm>,
        hat_tau: Vec<DifferentialForm>,
        check_omega: Vec<DifferentialForm>,
        check_tau: Vec<DifferentialForm>,
        cfg: &ProbeConfig,
    ) -> Result<Coframe, EdsError> {
        let blocks: [(&'static str, &Vec<DifferentialForm>); 5] = [
            ("theta", &theta),
            ("hat omega", &hat_omega),
            ("hat tau", &hat_tau),
            ("check omega", &check_omega),
            ("check tau", &check_tau),
        ];
        let mut count = 0;
        for (name, block) in blocks {
            if block.is_empty() {
                return Err(EdsError::CoframeBlock(name));
            }
            for f in block {
                same_chart(chart, f.chart())?;
                if f.degree() != 1 {
                    return Err(EdsError::GeneratorDegree(f.degree()));
                }
                count += 1;
            }
        }
        let dim = chart.dim();
        if count != dim {
            return Err(EdsError::CoframeCount { count, dim });
        }
        let cf = Coframe {
            chart: chart.clone(),
            theta,
            hat_omega,
            hat_tau,
            check_omega,
            check_tau,
        };
        let all: Vec<DifferentialForm> = cf.forms().into_iter().cloned().collect();
        let rank = require_constant(&crate::geometry::generic_rank_forms(&all, cfg)?)?;
        if rank != dim {
            return Err(EdsError::CoframeDeficient { rank, dim });
        }
        Ok(cf)
    }

    /// Builds the coframe from expression sources in the same block order
    /// as [`Coframe::new`].
    pub fn parse(
        chart: &Chart,
        theta: &[&str],
        hat_omega: &[&str],
        hat_tau: &[&str],
        check_omega: &[&str],
        check_tau: &[&str],
        cfg: &ProbeConfig,
    ) -> Result<Coframe, EdsError> {
        let blk = |srcs: &[&str]| -> Result<Vec<DifferentialForm>, GeomError> {
            srcs.iter().map(|s| parse_form(chart, s)).collect()
        };
        Coframe::new(
            chart,
            blk(theta)?,
            blk(hat_omega)?,
            blk(hat_tau)?,
            blk(check_omega)?,
            blk(check_tau)?,
            cfg,
        )
    }

    /// Class-s convenience constructor: each transverse block is a single
    /// 1-form (omega-hat, pi-hat, omega-check, pi-check).
    pub fn hyperbolic(
        chart: &Chart,
        theta: Vec<DifferentialForm>,
        hat_omega: DifferentialForm,
        hat_pi: DifferentialForm,
        check_omega: DifferentialForm,
        check_pi: DifferentialForm,
        cfg: &ProbeConfig,
    ) -> Result<Coframe, EdsError> {
        Coframe::new(
            chart,
            theta,
            vec![hat_omega],
            vec![hat_pi],
            vec![check_omega],
            vec![check_pi],
            cfg,
        )
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn theta(&self) -> &[DifferentialForm] {
        &self.theta
    }

    pub fn hat_omega(&self) -> &[DifferentialForm] {
        &self.hat_omega
    }

    pub fn hat_tau(&self) -> &[DifferentialForm] {
        &self.hat_tau
    }

    pub fn check_omega(&self) -> &[DifferentialForm] {
        &self.check_omega
    }

    pub fn check_tau(&self) -> &[DifferentialForm] {
        &self.check_tau
    }

    /// All coframe members in block order.
    pub fn forms(&self) -> Vec<&DifferentialForm> {
        self.theta
            .iter()
            .chain(&self.hat_omega)
            .chain(&self.hat_tau)
            .chain(&self.check_omega)
            .chain(&self.check_tau)
            .collect()
    }

    /// Display labels aligned with [`Coframe::forms`].
    pub fn labels(&self) -> Vec<String> {
        (0..self.chart.dim()).map(|i| self.label(i)).collect()
    }

    fn kind(&self, idx: usize) -> BlockKind {
        let s = self.theta.len();
        let n1 = self.hat_omega.len();
        let p1 = self.hat_tau.len();
        let n2 = self.check_omega.len();
        if idx < s {
            BlockKind::Theta
        } else if idx < s + n1 {
            BlockKind::HatOmega
        } else if idx < s + n1 + p1 {
            BlockKind::HatTau
        } else if idx < s + n1 + p1 + n2 {
            BlockKind::CheckOmega
        } else {
            BlockKind::CheckTau
        }
    }

    fn label(&self, idx: usize) -> String {
        let s = self.theta.len();
        let named = |base: &str, single: &str, pos: usize, len: usize| {
            if len == 1 {
                single.to_string()
            } else {
                format!("{base}_{}", pos + 1)
            }
        };
        match self.kind(idx) {
            BlockKind::Theta => format!("theta_{}", idx + 1),
            BlockKind::HatOmega => named("omega_hat", "omega_hat", idx - s, self.hat_omega.len()),
            BlockKind::HatTau => named(
                "tau_hat",
                "pi_hat",
                idx - s - self.hat_omega.len(),
                self.hat_tau.len(),
            ),
            BlockKind::CheckOmega => named(
                "omega_check",
                "omega_check",
                idx - s - self.hat_omega.len() - self.hat_tau.len(),
                self.check_omega.len(),
            ),
            BlockKind::CheckTau => named(
                "tau_check",
                "pi_check",
                idx - s - self.hat_omega.len() - self.hat_tau.len() - self.check_omega.len(),
                self.check_tau.len(),
            ),
        }
    }
}

/// Outcome of matching the structure equations against the two recognized
/// normal-form patterns.
#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    /// One theta row with a hat product, one with a check product, all
    /// others closed modulo the system; every transverse block a single
    /// form. `s` is the rank of the system.
    HyperbolicClassS { s: usize },
    /// Hat rows use only (hat omega, hat tau) products and check rows only
    /// (check omega, check tau) products; block sizes are recorded.
    Decomposable {
        n1: usize,
        p1: usize,
        n2: usize,
        p2: usize,
    },
    Neither { reason: String },
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::HyperbolicClassS { s } => write!(f, "hyperbolic of class {s}"),
            Classification::Decomposable { n1, p1, n2, p2 } => {
                write!(f, "decomposable of type [{n1},{p1}; {n2},{p2}]")
            }
            Classification::Neither { reason } => write!(f, "not recognized: {reason}"),
        }
    }
}

/// One structure term d(theta_generator) = ... + coefficient left^right + ...
/// surviving reduction modulo the theta block.
#[derive(Clone, Debug)]
pub struct TorsionTerm {
    pub generator: usize,
    pub left: String,
    pub right: String,
    pub coefficient: Expr,
}

/// Rank bookkeeping behind an integrability decision. The system is Darboux
/// integrable when its own stabilized system vanishes and each singular
/// system together with the other's stabilized system spans the cotangent
/// space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DarbouxVerdict {
    pub integrable: bool,
    pub dim: usize,
    pub rank_inf: usize,
    pub rank_hv: usize,
    pub rank_cv: usize,
    pub rank_hv_inf: usize,
    pub rank_cv_inf: usize,
    pub rank_hv_with_cv_inf: usize,
    pub rank_cv_with_hv_inf: usize,
    pub rank_inf_intersection: usize,
}

impl fmt::Display for DarbouxVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Darboux integrable: {}; rank I-infinity = {}, rank(hV + cV-infinity) = {}/{}, rank(cV + hV-infinity) = {}/{}",
            if self.integrable { "yes" } else { "no" },
            self.rank_inf,
            self.rank_hv_with_cv_inf,
            self.dim,
            self.rank_cv_with_hv_inf,
            self.dim
        )
    }
}

/// Full classification output: the matched pattern, the surviving
/// structure terms, the pair of second-order torsion invariants on
/// 7-dimensional class-3 charts, the singular pair, and the integrability
/// verdict when the singular pair exists.
#[derive(Clone, Debug)]
pub struct StructureReport {
    pub classification: Classification,
    pub torsion: Vec<TorsionTerm>,
    pub mu: Option<(Expr, Expr)>,
    pub singular: Option<(PfaffianSystem, PfaffianSystem)>,
    pub darboux: Option<DarbouxVerdict>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Closed,
    Hat,
    Check,
}

/// Expands the structure equations of `system` over `coframe` and matches
/// them against the hyperbolic and decomposable patterns. The theta block
/// must span `system`.
pub fn classify_structure(
    system: &PfaffianSystem,
    coframe: &Coframe,
    cfg: &ProbeConfig,
) -> Result<StructureReport, EdsError> {
    same_chart(system.chart(), coframe.chart())?;
    let chart = coframe.chart().clone();
    let n = chart.dim();
    let s = coframe.theta.len();

    let theta_span = PfaffianSystem::new(&chart, coframe.theta.clone(), cfg)?;
    if !theta_span.same_span(system, cfg)? {
        return Err(EdsError::ThetaSpanMismatch(format!(
            "the theta block and the system span different subbundles (ranks {} and {})",
            theta_span.rank(),
            system.rank()
        )));
    }

    // Extended chart carrying one formal tag coordinate per coframe member;
    // rewriting d(theta) over the tag differentials turns structure
    // coefficients into plain coefficient lookups.
    let mut tag_names: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = format!("_cf{i}");
        while chart.coords().contains(&t) {
            t.insert(0, '_');
        }
        tag_names.push(t);
    }
    let ext_coords: Vec<&str> = chart
        .coords()
        .iter()
        .map(String::as_str)
        .chain(tag_names.iter().map(String::as_str))
        .collect();
    let mut ext = Chart::new(&ext_coords)?;
    for c in chart.constraints() {
        ext = ext.with_constraint(c.clone());
    }

    let forms = coframe.forms();
    let rows: Vec<Vec<Expr>> = forms
        .iter()
        .map(|f| {
            (0..n)
                .map(|j| f.coefficient(&[chart.coord(j)]).unwrap())
                .collect()
        })
        .collect();
    let a = SymMat::from_rows(&rows);
    let probe = probe_for_chart(&chart, cfg);
    let b = a.inverse(&probe).ok_or_else(|| {
        EdsError::Reduction(
            "coframe matrix has full numeric rank but symbolic inversion failed".to_string(),
        )
    })?;
    // dx^l = sum_a B[l][a] e_a, so each coordinate differential maps to a
    // combination of tag differentials with function coefficients.
    let zero = Expr::zero();
    let images: Vec<DifferentialForm> = (0..n)
        .map(|l| {
            let mut coeffs = vec![zero.clone(); 2 * n];
            for (a_idx, entry) in b[l].iter().enumerate() {
                coeffs[n + a_idx] = entry.clone();
            }
            DifferentialForm::one_form(&ext, &coeffs)
        })
        .collect::<Result<_, GeomError>>()?;

    let expanded: Vec<DifferentialForm> = coframe
        .theta
        .iter()
        .map(|t| t.exterior_derivative().map_differentials(&images, &ext))
        .collect::<Result<_, GeomError>>()?;

    let mut torsion = Vec::new();
    let mut kinds = Vec::with_capacity(s);
    let mut neither: Option<String> = None;
    'rows: for (i, r) in expanded.iter().enumerate() {
        let mut in_hat = false;
        let mut in_check = false;
        for (idx, coeff) in r.terms() {
            let a_i = idx[0] as usize - n;
            let b_i = idx[1] as usize - n;
            if a_i >= s && b_i >= s {
                torsion.push(TorsionTerm {
                    generator: i,
                    left: coframe.label(a_i),
                    right: coframe.label(b_i),
                    coefficient: coeff.clone(),
                });
            } else {
                // theta-involving products vanish modulo the system
                continue;
            }
            if zero_probe(coeff, &probe) {
                // numerically vanishing residue the simplifier missed
                continue;
            }
            match (coframe.kind(a_i), coframe.kind(b_i)) {
                (BlockKind::HatOmega, BlockKind::HatTau)
                | (BlockKind::HatTau, BlockKind::HatOmega) => in_hat = true,
                (BlockKind::CheckOmega, BlockKind::CheckTau)
                | (BlockKind::CheckTau, BlockKind::CheckOmega) => in_check = true,
                _ => {
                    neither = Some(format!(
                        "d({}) has a ({}, {}) structure term with coefficient {}",
                        coframe.label(i),
                        coframe.label(a_i),
                        coframe.label(b_i),
                        coeff
                    ));
                    break 'rows;
                }
            }
        }
        kinds.push(match (in_hat, in_check) {
            (true, true) => {
                neither = Some(format!(
                    "d({}) mixes hat and check structure terms",
                    coframe.label(i)
                ));
                break 'rows;
            }
            (true, false) => RowKind::Hat,
            (false, true) => RowKind::Check,
            (false, false) => RowKind::Closed,
        });
    }

    let classification = if let Some(reason) = neither {
        Classification::Neither { reason }
    } else {
        let hat_rows = kinds.iter().filter(|k| **k == RowKind::Hat).count();
        let check_rows = kinds.iter().filter(|k| **k == RowKind::Check).count();
        let singleton = coframe.hat_omega.len() == 1
            && coframe.hat_tau.len() == 1
            && coframe.check_omega.len() == 1
            && coframe.check_tau.len() == 1;
        if hat_rows == 0 {
            Classification::Neither {
                reason: "no theta row has a hat structure term".to_string(),
            }
        } else if check_rows == 0 {
            Classification::Neither {
                reason: "no theta row has a check structure term".to_string(),
            }
        } else if singleton && hat_rows == 1 && check_rows == 1 {
            Classification::HyperbolicClassS { s }
        } else {
            Classification::Decomposable {
                n1: coframe.hat_omega.len(),
                p1: coframe.hat_tau.len(),
                n2: coframe.check_omega.len(),
                p2: coframe.check_tau.len(),
            }
        }
    };

    // The pair of invariants distinguishing Monge-Ampere structure on the
    // 7-dimensional class-3 charts: the coefficient of theta-check ^
    // pi-check in the hat row and of theta-hat ^ pi-hat in the check row.
    let mu = match &classification {
        Classification::HyperbolicClassS { s: 3 } if n == 7 => {
            let hat_row = kinds.iter().position(|k| *k == RowKind::Hat).unwrap();
            let check_row = kinds.iter().position(|k| *k == RowKind::Check).unwrap();
            let mu1 = expanded[hat_row]
                .coefficient(&[&tag_names[check_row], &tag_names[s + 3]])
                .map_err(EdsError::Geom)?;
            let mu2 = expanded[check_row]
                .coefficient(&[&tag_names[hat_row], &tag_names[s + 1]])
                .map_err(EdsError::Geom)?;
            Some((simplify(&mu1), simplify(&mu2)))
        }
        _ => None,
    };

    let singular = match &classification {
        Classification::Neither { .. } => None,
        _ => {
            let mut hv = coframe.theta.clone();
            hv.extend(coframe.hat_omega.iter().cloned());
            hv.extend(coframe.hat_tau.iter().cloned());
            let mut cv = coframe.theta.clone();
            cv.extend(coframe.check_omega.iter().cloned());
            cv.extend(coframe.check_tau.iter().cloned());
            Some((
                PfaffianSystem::new(&chart, hv, cfg)?,
                PfaffianSystem::new(&chart, cv, cfg)?,
            ))
        }
    };

    let darboux = match &singular {
        Some((hv, cv)) => Some(is_darboux_integrable(system, hv, cv, cfg)?),
        None => None,
    };

    Ok(StructureReport {
        classification,
        torsion,
        mu,
        singular,
        darboux,
    })
}

/// Decides Darboux integrability from the singular pair: the system's own
/// stabilized derived system must vanish, and each singular system joined
/// with the other's stabilized system must span the cotangent space. All
/// the ranks entering the decision are reported.
pub fn is_darboux_integrable(
    system: &PfaffianSystem,
    hv: &PfaffianSystem,
    cv: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<DarbouxVerdict, EdsError> {
    same_chart(system.chart(), hv.chart())?;
    same_chart(system.chart(), cv.chart())?;
    if !hv.contains(system, cfg)? {
        return Err(EdsError::NotContaining(
            "the hat singular system".to_string(),
        ));
    }
    if !cv.contains(system, cfg)? {
        return Err(EdsError::NotContaining(
            "the check singular system".to_string(),
        ));
    }
    let dim = system.chart().dim();
    let inf = system.infinity(cfg)?;
    let hv_inf = hv.infinity(cfg)?;
    let cv_inf = cv.infinity(cfg)?;
    let rank_hv_with_cv_inf = require_constant(&combined_rank(&[hv, &cv_inf], cfg)?)?;
    let rank_cv_with_hv_inf = require_constant(&combined_rank(&[cv, &hv_inf], cfg)?)?;
    let rank_inf_union = require_constant(&combined_rank(&[&hv_inf, &cv_inf], cfg)?)?;
    Ok(DarbouxVerdict {
        integrable: inf.rank() == 0 && rank_hv_with_cv_inf == dim && rank_cv_with_hv_inf == dim,
        dim,
        rank_inf: inf.rank(),
        rank_hv: hv.rank(),
        rank_cv: cv.rank(),
        rank_hv_inf: hv_inf.rank(),
        rank_cv_inf: cv_inf.rank(),
        rank_hv_with_cv_inf,
        rank_cv_with_hv_inf,
        rank_inf_intersection: hv_inf.rank() + cv_inf.rank() - rank_inf_union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eds::fixtures::{
        cfg, hyperbolic_chart, hyperbolic_system, liouville_chart, liouville_cv, liouville_hv,
        liouville_system, separable_chart, separable_cv, separable_hv, separable_system,
        wave_chart, wave_cv, wave_hv, wave_system, HYPERBOLIC_PI_CHECK, HYPERBOLIC_PI_HAT,
    };

    const HYPERBOLIC_THETA: [&str; 3] = [
        "d(u) - u_x*d(x) - u_y*d(y)",
        "d(u_x) - u_xx*d(x) - (u_x*u_y/(u - x))*d(y)",
        "d(u_y) - (u_x*u_y/(u - x))*d(x) - u_yy*d(y)",
    ];

    fn hyperbolic_setup() -> (Chart, PfaffianSystem, Coframe) {
        let m = hyperbolic_chart();
        let i = hyperbolic_system(&m);
        let cf = Coframe::parse(
            &m,
            &HYPERBOLIC_THETA,
            &["d(x)"],
            &[HYPERBOLIC_PI_HAT],
            &["d(y)"],
            &[HYPERBOLIC_PI_CHECK],
            &cfg(),
        )
        .unwrap();
        (m, i, cf)
    }

    #[test]
    fn hyperbolic_equation_is_class_three() {
        let (_, i, cf) = hyperbolic_setup();
        let rep = classify_structure(&i, &cf, &cfg()).unwrap();
        assert_eq!(rep.classification, Classification::HyperbolicClassS { s: 3 });
        let (mu1, mu2) = rep.mu.unwrap();
        assert!(mu1.is_zero(), "mu1 = {mu1}");
        assert!(mu2.is_zero(), "mu2 = {mu2}");
        // exactly the two structure products survive modulo the system
        assert_eq!(rep.torsion.len(), 2);
        let hat = &rep.torsion[0];
        assert_eq!(
            (hat.generator, hat.left.as_str(), hat.right.as_str()),
            (1, "omega_hat", "pi_hat")
        );
        assert!(simplify(&(hat.coefficient.clone() - Expr::one())).is_zero());
        let check = &rep.torsion[1];
        assert_eq!(
            (check.generator, check.left.as_str(), check.right.as_str()),
            (2, "omega_check", "pi_check")
        );
        assert!(simplify(&(check.coefficient.clone() - Expr::one())).is_zero());
    }

    #[test]
    fn hyperbolic_equation_is_darboux_integrable() {
        let (_, i, cf) = hyperbolic_setup();
        let rep = classify_structure(&i, &cf, &cfg()).unwrap();
        let (hv, cv) = rep.singular.unwrap();
        assert_eq!((hv.rank(), cv.rank()), (5, 5));
        let v = rep.darboux.unwrap();
        assert!(v.integrable);
        assert_eq!(v.rank_inf, 0);
        assert_eq!((v.rank_hv_inf, v.rank_cv_inf), (3, 2));
        assert_eq!((v.rank_hv_with_cv_inf, v.rank_cv_with_hv_inf), (7, 7));
        assert_eq!(v.rank_inf_intersection, 0);
    }

    #[test]
    fn separable_pair_is_decomposable() {
        let m = separable_chart();
        let i = separable_system(&m);
        let cf = Coframe::parse(
            &m,
            &[
                "d(u) - u_x*d(x) - u_y*d(y) - u_z*d(z)",
                "d(u_x) - u_xx*d(x) - u_xy*d(y)",
                "d(u_y) - u_xy*d(x) - u_yy*d(y)",
                "d(u_z) - u_zz*d(z)",
            ],
            &["d(x)", "d(y)"],
            &["d(u_xx)", "d(u_xy)", "d(u_yy)"],
            &["d(z)"],
            &["d(u_zz)"],
            &cfg(),
        )
        .unwrap();
        let rep = classify_structure(&i, &cf, &cfg()).unwrap();
        assert_eq!(
            rep.classification,
            Classification::Decomposable {
                n1: 2,
                p1: 3,
                n2: 1,
                p2: 1
            }
        );
        assert!(rep.mu.is_none());
        assert_eq!(rep.torsion.len(), 5);
        let (hv, cv) = rep.singular.unwrap();
        assert_eq!((hv.rank(), cv.rank()), (9, 6));
        assert!(hv.same_span(&separable_hv(&m, &i), &cfg()).unwrap());
        assert!(cv.same_span(&separable_cv(&m, &i), &cfg()).unwrap());
        let v = rep.darboux.unwrap();
        assert!(v.integrable);
        assert_eq!((v.rank_hv_inf, v.rank_cv_inf), (7, 3));
        assert_eq!((v.rank_hv_with_cv_inf, v.rank_cv_with_hv_inf), (11, 11));
        assert_eq!(v.rank_inf_intersection, 0);
    }

    #[test]
    fn torsion_invariants_detect_non_monge_ampere_structure() {
        // d(theta_2) = omega_hat ^ pi_hat + theta_3 ^ pi_check carries a
        // nonzero first invariant; theta_1 is exact, so the classification
        // succeeds while integrability fails.
        let m = Chart::new(&["t0", "t1", "t2", "o1", "p1", "o2", "p2"]).unwrap();
        let theta = [
            "d(t0)",
            "d(t1) - p1*d(o1) - p2*d(t2)",
            "d(t2) - o2*d(p2)",
        ];
        let i = PfaffianSystem::parse(&m, &theta, &cfg()).unwrap();
        let cf = Coframe::parse(
            &m,
            &theta,
            &["d(o1)"],
            &["d(p1)"],
            &["d(o2)"],
            &["d(p2)"],
            &cfg(),
        )
        .unwrap();
        let rep = classify_structure(&i, &cf, &cfg()).unwrap();
        assert_eq!(rep.classification, Classification::HyperbolicClassS { s: 3 });
        let (mu1, mu2) = rep.mu.unwrap();
        assert!(simplify(&(mu1 - Expr::one())).is_zero());
        assert!(mu2.is_zero());
        let v = rep.darboux.unwrap();
        assert!(!v.integrable);
        assert_eq!(v.rank_inf, 1);
    }

    #[test]
    fn swapped_transverse_blocks_are_not_recognized() {
        let m = hyperbolic_chart();
        let i = hyperbolic_system(&m);
        let cf = Coframe::parse(
            &m,
            &HYPERBOLIC_THETA,
            &["d(x)"],
            &[HYPERBOLIC_PI_CHECK],
            &["d(y)"],
            &[HYPERBOLIC_PI_HAT],
            &cfg(),
        )
        .unwrap();
        let rep = classify_structure(&i, &cf, &cfg()).unwrap();
        assert!(matches!(rep.classification, Classification::Neither { .. }));
        assert!(rep.singular.is_none());
        assert!(rep.darboux.is_none());
    }

    #[test]
    fn wave_equation_is_darboux_integrable() {
        let m = wave_chart();
        let i = wave_system(&m);
        let v = is_darboux_integrable(&i, &wave_hv(&m, &i), &wave_cv(&m, &i), &cfg()).unwrap();
        assert!(v.integrable);
        assert_eq!((v.rank_hv_inf, v.rank_cv_inf), (3, 3));
        assert_eq!(v.rank_inf_intersection, 0);
    }

    #[test]
    fn liouville_equation_is_darboux_integrable() {
        let m = liouville_chart();
        let i = liouville_system(&m);
        let hv = liouville_hv(&m, &i);
        let cv = liouville_cv(&m, &i);
        let v = is_darboux_integrable(&i, &hv, &cv, &cfg()).unwrap();
        assert!(v.integrable);
        assert_eq!((v.rank_hv_inf, v.rank_cv_inf), (2, 2));
        assert_eq!((v.rank_hv_with_cv_inf, v.rank_cv_with_hv_inf), (7, 7));
        // the stabilized hat system is spanned by dx and d(u_xx - u_x^2/2)
        let want =
            PfaffianSystem::parse(&m, &["d(x)", "d(u_xx) - u_x*d(u_x)"], &cfg()).unwrap();
        assert!(hv
            .infinity(&cfg())
            .unwrap()
            .same_span(&want, &cfg())
            .unwrap());
    }

    #[test]
    fn exact_one_form_blocks_integrability() {
        let m = Chart::new(&["x", "y", "u"]).unwrap();
        let i = PfaffianSystem::parse(&m, &["d(u)"], &cfg()).unwrap();
        let hv = PfaffianSystem::parse(&m, &["d(u)", "d(x)"], &cfg()).unwrap();
        let cv = PfaffianSystem::parse(&m, &["d(u)", "d(y)"], &cfg()).unwrap();
        let v = is_darboux_integrable(&i, &hv, &cv, &cfg()).unwrap();
        assert!(!v.integrable);
        assert_eq!(v.rank_inf, 1);
        assert_eq!((v.rank_hv_with_cv_inf, v.rank_cv_with_hv_inf), (3, 3));
        assert_eq!(v.rank_inf_intersection, 1);
    }

    #[test]
    fn singular_systems_must_contain_the_system() {
        let m = wave_chart();
        let i = wave_system(&m);
        let hv = wave_hv(&m, &i);
        let bad = PfaffianSystem::parse(&m, &["d(x)", "d(y)"], &cfg()).unwrap();
        assert!(matches!(
            is_darboux_integrable(&i, &hv, &bad, &cfg()),
            Err(EdsError::NotContaining(_))
        ));
    }

    #[test]
    fn theta_block_must_span_the_system() {
        let m = hyperbolic_chart();
        let i = hyperbolic_system(&m);
        let cf = Coframe::parse(
            &m,
            &["d(u) - u_x*d(x) - u_y*d(y)", "d(u_x)", "d(u_y)"],
            &["d(x)"],
            &[HYPERBOLIC_PI_HAT],
            &["d(y)"],
            &[HYPERBOLIC_PI_CHECK],
            &cfg(),
        )
        .unwrap();
        assert!(matches!(
            classify_structure(&i, &cf, &cfg()),
            Err(EdsError::ThetaSpanMismatch(_))
        ));
    }

    #[test]
    fn coframe_shape_is_validated() {
        let m = Chart::new(&["a", "b", "c", "p", "q"]).unwrap();
        let f = |s: &str| parse_form(&m, s).unwrap();
        let empty = Coframe::new(
            &m,
            vec![f("d(a)")],
            vec![f("d(b)")],
            vec![f("d(c)")],
            vec![f("d(p)")],
            vec![],
            &cfg(),
        );
        assert!(matches!(empty, Err(EdsError::CoframeBlock("check tau"))));
        let over = Coframe::new(
            &m,
            vec![f("d(a)"), f("d(b)")],
            vec![f("d(b)")],
            vec![f("d(c)")],
            vec![f("d(p)")],
            vec![f("d(q)")],
            &cfg(),
        );
        assert!(matches!(
            over,
            Err(EdsError::CoframeCount { count: 6, dim: 5 })
        ));
        let dependent = Coframe::new(
            &m,
            vec![f("d(a)")],
            vec![f("d(b)")],
            vec![f("d(c)")],
            vec![f("d(p)")],
            vec![f("b*d(b) + p*d(p)")],
            &cfg(),
        );
        assert!(matches!(
            dependent,
            Err(EdsError::CoframeDeficient { rank: 4, dim: 5 })
        ));
    }
}
