//! Constant-rank Pfaffian systems, derived systems, and first integrals.

use super::EdsError;
use crate::geometry::linalg::{clear_denominators, probe_for_chart, SymMat};
use crate::geometry::rank::{describe_point, form_columns};
use crate::geometry::{
    d_scalar, generic_rank_forms, parse_form, span_contains, Chart, DifferentialForm, GeomError,
    ProbeConfig, RankProbe,
};
use crate::symcore::Expr;
use std::fmt;

/// A span of 1-forms of constant generic rank on a chart. The rank is
/// probed at construction; a system whose generators change rank across the
/// domain is rejected with a witness point.
#[derive(Clone, Debug)]
pub struct PfaffianSystem {
    chart: Chart,
    generators: Vec<DifferentialForm>,
    rank: usize,
}

/// Errors with a witness unless the probed rank is the same at every point.
pub(crate) fn require_constant(p: &RankProbe) -> Result<usize, GeomError> {
    if p.constant {
        return Ok(p.rank);
    }
    let witness = p
        .drop_witness()
        .map(describe_point)
        .unwrap_or_else(|| "unknown".to_string());
    let low = p.ranks.iter().copied().min().unwrap_or(0);
    Err(GeomError::RankDrop {
        low,
        high: p.rank,
        witness,
    })
}

impl PfaffianSystem {
    pub fn new(
        chart: &Chart,
        generators: Vec<DifferentialForm>,
        cfg: &ProbeConfig,
    ) -> Result<PfaffianSystem, EdsError> {
        for g in &generators {
            crate::geometry::same_chart(chart, g.chart())?;
            if g.degree() != 1 {
                return Err(EdsError::GeneratorDegree(g.degree()));
            }
        }
        let probe = generic_rank_forms(&generators, cfg)?;
        let rank = require_constant(&probe)?;
        Ok(PfaffianSystem {
            chart: chart.clone(),
            generators,
            rank,
        })
    }

    pub fn parse(chart: &Chart, srcs: &[&str], cfg: &ProbeConfig) -> Result<PfaffianSystem, EdsError> {
        let gens = srcs
            .iter()
            .map(|s| parse_form(chart, s))
            .collect::<Result<Vec<_>, _>>()?;
        PfaffianSystem::new(chart, gens, cfg)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn generators(&self) -> &[DifferentialForm] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    /// Whether the form lies in the span at every probe point.
    pub fn contains_form(
        &self,
        f: &DifferentialForm,
        cfg: &ProbeConfig,
    ) -> Result<bool, GeomError> {
        span_contains(&self.generators, f, cfg)
    }

    /// Whether every generator of `other` lies in this span.
    pub fn contains(&self, other: &PfaffianSystem, cfg: &ProbeConfig) -> Result<bool, GeomError> {
        for g in &other.generators {
            if !self.contains_form(g, cfg)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Mutual span containment.
    pub fn same_span(&self, other: &PfaffianSystem, cfg: &ProbeConfig) -> Result<bool, GeomError> {
        Ok(self.contains(other, cfg)? && other.contains(self, cfg)?)
    }

    /// The derived system: all combinations θ = Σ aᵢ θ̃ⁱ with function
    /// coefficients whose exterior derivative lies in the algebraic ideal.
    /// Since da ∧ θ̃ is always in the ideal, the condition is the pointwise
    /// linear system Σ aᵢ · (dθ̃ⁱ mod ideal) = 0, solved exactly over the
    /// rational-function field and cross-checked by numeric probing.
    pub fn derived(&self, cfg: &ProbeConfig) -> Result<PfaffianSystem, EdsError> {
        if self.rank == 0 {
            return Ok(self.clone());
        }
        let red = IdealReducer::new(self, cfg)?;
        let residuals = red
            .echelon
            .iter()
            .map(|t| red.reduce(&t.exterior_derivative()))
            .collect::<Result<Vec<_>, _>>()?;
        let rp = generic_rank_forms(&residuals, cfg)?;
        let kept = residuals.len() - require_constant(&rp)?;
        let cols = form_columns(&residuals);
        let rows: Vec<Vec<Expr>> = residuals.iter().map(|f| f.row(&cols)).collect();
        let probe = probe_for_chart(&self.chart, cfg);
        let null = SymMat::from_rows(&rows).transpose().nullspace(&probe);
        if null.len() != kept {
            return Err(EdsError::Reduction(format!(
                "derived subsystem has symbolic corank {} but numeric corank {}",
                null.len(),
                kept
            )));
        }
        let mut gens = Vec::with_capacity(null.len());
        for a in null {
            let a = clear_denominators(&a);
            let mut g = DifferentialForm::zero(&self.chart, 1);
            for (coef, t) in a.iter().zip(&red.echelon) {
                if !coef.is_zero() {
                    g = g.add(&t.scale(coef))?;
                }
            }
            gens.push(g);
        }
        PfaffianSystem::new(&self.chart, gens, cfg)
    }

    /// The derived flag I = I⁽⁰⁾ ⊃ I⁽¹⁾ ⊃ …, stopping at the first
    /// repetition. Ranks strictly decrease until stabilization, so the
    /// depth guard only trips if probing misbehaves.
    pub fn derived_flag(&self, cfg: &ProbeConfig) -> Result<DerivedFlag, EdsError> {
        let mut systems = vec![self.clone()];
        loop {
            let cur = systems.last().unwrap();
            let next = cur.derived(cfg)?;
            if next.rank() == cur.rank() {
                break;
            }
            systems.push(next);
            if systems.len() > self.chart.dim() + 1 {
                return Err(EdsError::FlagDepth(systems.len()));
            }
        }
        Ok(DerivedFlag { systems })
    }

    /// The largest completely integrable subsystem: the last entry of the
    /// derived flag.
    pub fn infinity(&self, cfg: &ProbeConfig) -> Result<PfaffianSystem, EdsError> {
        let mut flag = self.derived_flag(cfg)?;
        Ok(flag.systems.pop().unwrap())
    }

    /// Whether dF lies in the span of the system at every probe point, i.e.
    /// F is a first integral candidate confirmed on the sampled domain.
    pub fn verify_first_integral(&self, f: &Expr, cfg: &ProbeConfig) -> Result<bool, EdsError> {
        self.chart.check_scalar(f)?;
        let df = d_scalar(&self.chart, f);
        Ok(span_contains(&self.generators, &df, cfg)?)
    }
}

impl fmt::Display for PfaffianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(|g| format!("{g}")).collect();
        write!(f, "span{{{}}}", gens.join(", "))
    }
}

/// The derived flag of a system, ending at its stabilization.
#[derive(Clone, Debug)]
pub struct DerivedFlag {
    systems: Vec<PfaffianSystem>,
}

impl DerivedFlag {
    pub fn systems(&self) -> &[PfaffianSystem] {
        &self.systems
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.rank()).collect()
    }

    /// The stabilized system at the end of the flag.
    pub fn infinity(&self) -> &PfaffianSystem {
        self.systems.last().unwrap()
    }
}

/// Generic rank of the union of the systems' generators.
pub fn combined_rank(
    systems: &[&PfaffianSystem],
    cfg: &ProbeConfig,
) -> Result<RankProbe, GeomError> {
    let forms: Vec<DifferentialForm> = systems
        .iter()
        .flat_map(|s| s.generators.iter().cloned())
        .collect();
    generic_rank_forms(&forms, cfg)
}

/// Echelonized generators of a system together with the substitution that
/// rewrites any form into non-pivot coordinate differentials, i.e. into its
/// canonical representative modulo the algebraic ideal of the system.
pub(crate) struct IdealReducer {
    chart: Chart,
    pub(crate) echelon: Vec<DifferentialForm>,
    images: Vec<DifferentialForm>,
}

impl IdealReducer {
    pub(crate) fn new(sys: &PfaffianSystem, cfg: &ProbeConfig) -> Result<IdealReducer, EdsError> {
        let chart = sys.chart().clone();
        let n = chart.dim();
        let rows: Vec<Vec<Expr>> = sys
            .generators()
            .iter()
            .map(|g| {
                (0..n)
                    .map(|j| g.coefficient(&[chart.coord(j)]).unwrap())
                    .collect()
            })
            .collect();
        let mut m = SymMat::from_rows(&rows);
        let probe = probe_for_chart(&chart, cfg);
        let piv = m.reduce_free(&probe);
        if piv.len() != sys.rank() {
            return Err(EdsError::Reduction(format!(
                "elimination found {} independent generators but the generic rank is {}",
                piv.len(),
                sys.rank()
            )));
        }
        let mut echelon = Vec::with_capacity(piv.len());
        let mut images: Vec<DifferentialForm> = (0..n)
            .map(|l| DifferentialForm::differential(&chart, chart.coord(l)).unwrap())
            .collect();
        for (r, c) in &piv {
            let coeffs: Vec<Expr> = (0..n).map(|j| m.at(*r, j).clone()).collect();
            let row = DifferentialForm::one_form(&chart, &coeffs)?;
            // dx^c ≡ dx^c − θ̃ mod the span, and the difference has no pivot
            // components, so one substitution pass fully reduces
            images[*c] = images[*c].sub(&row)?;
            echelon.push(row);
        }
        Ok(IdealReducer {
            chart,
            echelon,
            images,
        })
    }

    pub(crate) fn reduce(&self, f: &DifferentialForm) -> Result<DifferentialForm, GeomError> {
        f.map_differentials(&self.images, &self.chart)
    }
}
