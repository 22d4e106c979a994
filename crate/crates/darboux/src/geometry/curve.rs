//! Curves into a chart, given by one expression per coordinate in a single
//! parameter.

use super::{Chart, DifferentialForm, GeomError, SmoothMap};
use crate::symcore::{differentiate, Expr};
use std::fmt;

/// A parametrized curve t -> (x¹(t), …, xⁿ(t)) into a chart. Components may
/// mention opaque functions of the parameter; their bindings are supplied at
/// evaluation time.
#[derive(Clone, Debug)]
pub struct ParamCurve {
    map: SmoothMap,
    param: String,
}

impl ParamCurve {
    pub fn new(target: &Chart, param: &str, comps: &[Expr]) -> Result<ParamCurve, GeomError> {
        let source = Chart::new(&[param])?;
        let map = SmoothMap::new(&source, target, comps)?;
        Ok(ParamCurve {
            map,
            param: param.to_string(),
        })
    }

    pub fn parse(target: &Chart, param: &str, srcs: &[&str]) -> Result<ParamCurve, GeomError> {
        let source = Chart::new(&[param])?;
        let map = SmoothMap::parse(&source, target, srcs)?;
        Ok(ParamCurve {
            map,
            param: param.to_string(),
        })
    }

    /// The chart the curve maps into.
    pub fn chart(&self) -> &Chart {
        self.map.target()
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn components(&self) -> &[Expr] {
        self.map.exprs()
    }

    /// The component expression for a named target coordinate.
    pub fn component(&self, coord: &str) -> Result<&Expr, GeomError> {
        self.map.expr_for(coord)
    }

    /// The underlying smooth map from the 1-dimensional parameter chart.
    pub fn as_map(&self) -> &SmoothMap {
        &self.map
    }

    /// Componentwise derivative in the parameter.
    pub fn velocity(&self) -> Vec<Expr> {
        self.map
            .exprs()
            .iter()
            .map(|e| differentiate(e, &self.param))
            .collect()
    }

    /// A scalar on the chart composed with the curve.
    pub fn pullback_scalar(&self, f: &Expr) -> Expr {
        self.map.pullback_scalar(f)
    }

    /// The dt-coefficient of the pullback of a 1-form: θ(γ̇) as a function
    /// of the parameter.
    pub fn pullback_coefficient(&self, form: &DifferentialForm) -> Result<Expr, GeomError> {
        if form.degree() != 1 {
            return Err(GeomError::DegreeMismatch(form.degree(), 1));
        }
        let pb = self.map.pullback(form)?;
        if pb.is_zero() {
            return Ok(Expr::zero());
        }
        pb.coefficient(&[&self.param])
    }
}

impl fmt::Display for ParamCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .chart()
            .coords()
            .iter()
            .zip(self.map.exprs())
            .map(|(c, e)| format!("{c} = {e}"))
            .collect();
        write!(f, "{} -> ({})", self.param, parts.join(", "))
    }
}
