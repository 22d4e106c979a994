//! Vector fields and smooth maps between charts.

use super::form::d_scalar;
use super::{same_chart, Chart, DifferentialForm, GeomError};
use crate::symcore::{differentiate, simplify, substitute, Expr, Substitution};
use std::fmt;

/// A vector field on a chart: one component expression per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    chart: Chart,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, comps: &[Expr]) -> Result<VectorField, GeomError> {
        if comps.len() != chart.dim() {
            return Err(GeomError::ComponentCount {
                expected: chart.dim(),
                found: comps.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            comps: comps.iter().map(simplify).collect(),
        })
    }

    /// The coordinate field d/d(name).
    pub fn coordinate(chart: &Chart, name: &str) -> Result<VectorField, GeomError> {
        let i = chart.index_of(name)?;
        let mut comps = vec![Expr::zero(); chart.dim()];
        comps[i] = Expr::one();
        Ok(VectorField {
            chart: chart.clone(),
            comps,
        })
    }

    /// Builds a field from (coordinate, component) pairs; the rest are zero.
    pub fn from_pairs(chart: &Chart, pairs: &[(&str, Expr)]) -> Result<VectorField, GeomError> {
        let mut comps = vec![Expr::zero(); chart.dim()];
        for (name, e) in pairs {
            let i = chart.index_of(name)?;
            comps[i] = simplify(e);
        }
        Ok(VectorField {
            chart: chart.clone(),
            comps,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    /// Applies the field to a scalar: the directional derivative.
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (c, name) in self.comps.iter().zip(self.chart.coords()) {
            if !c.is_zero() {
                terms.push(c.clone() * differentiate(f, name));
            }
        }
        simplify(&Expr::sum(terms))
    }

    /// Lie bracket [X, Y].
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        same_chart(&self.chart, &other.chart)?;
        let comps: Vec<Expr> = (0..self.chart.dim())
            .map(|i| self.apply(&other.comps[i]) - other.apply(&self.comps[i]))
            .collect();
        VectorField::new(&self.chart, &comps)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        same_chart(&self.chart, &other.chart)?;
        let comps: Vec<Expr> = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        VectorField::new(&self.chart, &comps)
    }

    pub fn scale(&self, s: &Expr) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| simplify(&(s.clone() * c.clone())))
                .collect(),
        }
    }

    pub fn neg(&self) -> VectorField {
        self.scale(&Expr::int(-1))
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, name) in self.comps.iter().zip(self.chart.coords()) {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.is_one() {
                write!(f, "D_{}", name)?;
            } else {
                write!(f, "({})*D_{}", c, name)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// A smooth map between charts, given by one target-coordinate expression in
/// the source coordinates per target coordinate.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    source: Chart,
    target: Chart,
    exprs: Vec<Expr>,
}

impl SmoothMap {
    pub fn new(source: &Chart, target: &Chart, exprs: &[Expr]) -> Result<SmoothMap, GeomError> {
        if exprs.len() != target.dim() {
            return Err(GeomError::ComponentCount {
                expected: target.dim(),
                found: exprs.len(),
            });
        }
        let exprs: Vec<Expr> = exprs.iter().map(simplify).collect();
        for e in &exprs {
            source.check_scalar(e)?;
        }
        Ok(SmoothMap {
            source: source.clone(),
            target: target.clone(),
            exprs,
        })
    }

    /// Parses each target coordinate expression in source coordinates.
    pub fn parse(source: &Chart, target: &Chart, srcs: &[&str]) -> Result<SmoothMap, GeomError> {
        let exprs = srcs
            .iter()
            .map(|s| source.parse_expr(s))
            .collect::<Result<Vec<_>, _>>()?;
        SmoothMap::new(source, target, &exprs)
    }

    pub fn identity(chart: &Chart) -> SmoothMap {
        let exprs: Vec<Expr> = chart.coords().iter().map(Expr::var).collect();
        SmoothMap {
            source: chart.clone(),
            target: chart.clone(),
            exprs,
        }
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    /// The expression for a target coordinate.
    pub fn expr_for(&self, target_coord: &str) -> Result<&Expr, GeomError> {
        Ok(&self.exprs[self.target.index_of(target_coord)?])
    }

    fn substitution(&self) -> Substitution {
        let mut su = Substitution::new();
        for (name, e) in self.target.coords().iter().zip(&self.exprs) {
            su = su.var(name, e.clone());
        }
        su
    }

    /// Pulls a scalar on the target back to the source by simultaneous
    /// substitution.
    pub fn pullback_scalar(&self, f: &Expr) -> Expr {
        simplify(&substitute(f, &self.substitution()))
    }

    /// Pulls a form on the target back to the source.
    pub fn pullback(&self, a: &DifferentialForm) -> Result<DifferentialForm, GeomError> {
        same_chart(&self.target, a.chart())?;
        let mut out = DifferentialForm::zero(&self.source, a.degree());
        // differentials of the coordinate images, computed once
        let mut dphi: Vec<Option<DifferentialForm>> = vec![None; self.target.dim()];
        for (idx, c) in a.terms() {
            let mut term = DifferentialForm::scalar(&self.source, self.pullback_scalar(c));
            for i in idx {
                let i = *i as usize;
                if dphi[i].is_none() {
                    dphi[i] = Some(d_scalar(&self.source, &self.exprs[i]));
                }
                term = term.wedge(dphi[i].as_ref().unwrap())?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Composition: self followed by `next` (source of `next` is our target).
    pub fn then(&self, next: &SmoothMap) -> Result<SmoothMap, GeomError> {
        same_chart(&self.target, &next.source)?;
        let su = self.substitution();
        let exprs: Vec<Expr> = next
            .exprs
            .iter()
            .map(|e| simplify(&substitute(e, &su)))
            .collect();
        SmoothMap::new(&self.source, &next.target, &exprs)
    }
}
