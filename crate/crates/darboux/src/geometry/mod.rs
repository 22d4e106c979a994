//! Coordinate charts, differential forms, vector fields, and smooth maps.
//!
//! A [`Chart`] fixes an ordered list of coordinate names, optionally with
//! domain constraints (nonvanishing or positivity conditions) that numeric
//! probing respects. [`DifferentialForm`] stores a k-form sparsely by sorted
//! multi-index with simplified coefficients; wedge, exterior derivative,
//! interior product, and Lie derivative (Cartan formula) are exact symbolic
//! operations. [`SmoothMap`] pulls scalars and forms back along coordinate
//! expressions. Generic rank over the coefficient field is decided by
//! seeded numeric probing at random rational points ([`rank`]), while
//! annihilators are computed by exact elimination ([`linalg`]).

mod curve;
mod form;
mod formparse;
pub mod linalg;
pub mod rank;
mod vector;

pub use curve::ParamCurve;
pub use form::{d_scalar, DifferentialForm};
pub use formparse::parse_form;
pub use linalg::{annihilating_forms, annihilator, SymMat};
pub use rank::{
    generic_rank_fields, generic_rank_forms, span_contains, ProbeConfig, RankProbe,
};
pub use vector::{SmoothMap, VectorField};

use crate::symcore::{parse_strict, Expr, ParseError};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("chart mismatch: ({0}) vs ({1})")]
    ChartMismatch(String, String),
    #[error("degree mismatch: {0}-form vs {1}-form")]
    DegreeMismatch(usize, usize),
    #[error("duplicate coordinate name `{0}`")]
    DuplicateCoordinate(String),
    #[error("unknown coordinate `{0}` on chart ({1})")]
    UnknownCoordinate(String, String),
    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("expression mentions `{0}`, which is not a coordinate of ({1})")]
    ForeignVariable(String, String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    FormGrammar(String),
    #[error("rank drop detected on the domain: rank {low} at {witness} but {high} generically")]
    RankDrop {
        low: usize,
        high: usize,
        witness: String,
    },
    #[error("no valid probe point found inside domain constraints")]
    NoProbePoint,
    #[error("numeric evaluation failed during probing: {0}")]
    ProbeEval(String),
}

/// A domain constraint attached to a chart. Numeric probing samples only
/// points satisfying every constraint with a safety margin.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// The expression stays bounded away from zero.
    NonZero(Expr),
    /// The expression stays positive.
    Positive(Expr),
}

impl Constraint {
    pub fn expr(&self) -> &Expr {
        match self {
            Constraint::NonZero(e) | Constraint::Positive(e) => e,
        }
    }
}

#[derive(Debug, PartialEq)]
struct ChartData {
    coords: Vec<String>,
    constraints: Vec<Constraint>,
}

/// An ordered coordinate system with optional domain constraints. Cheap to
/// clone; all values built on a chart keep a handle to it.
#[derive(Clone, Debug)]
pub struct Chart(Arc<ChartData>);

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Chart {
    pub fn new(coords: &[&str]) -> Result<Chart, GeomError> {
        let mut seen = BTreeSet::new();
        for c in coords {
            if !seen.insert(*c) {
                return Err(GeomError::DuplicateCoordinate(c.to_string()));
            }
        }
        Ok(Chart(Arc::new(ChartData {
            coords: coords.iter().map(|c| c.to_string()).collect(),
            constraints: Vec::new(),
        })))
    }

    /// Adds a nonvanishing constraint to the domain.
    pub fn nonzero(self, e: Expr) -> Chart {
        self.with_constraint(Constraint::NonZero(e))
    }

    /// Adds a positivity constraint to the domain.
    pub fn positive(self, e: Expr) -> Chart {
        self.with_constraint(Constraint::Positive(e))
    }

    pub fn with_constraint(self, c: Constraint) -> Chart {
        let mut data = ChartData {
            coords: self.0.coords.clone(),
            constraints: self.0.constraints.clone(),
        };
        data.constraints.push(c);
        Chart(Arc::new(data))
    }

    pub fn dim(&self) -> usize {
        self.0.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.0.coords
    }

    pub fn coord(&self, i: usize) -> &str {
        &self.0.coords[i]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.0.constraints
    }

    pub fn index_of(&self, name: &str) -> Result<usize, GeomError> {
        self.0
            .coords
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| GeomError::UnknownCoordinate(name.to_string(), self.label()))
    }

    pub fn coord_set(&self) -> BTreeSet<String> {
        self.0.coords.iter().cloned().collect()
    }

    /// The coordinate list as display text, used in error messages.
    pub fn label(&self) -> String {
        self.0.coords.join(", ")
    }

    /// Concatenates two charts with disjoint coordinate names; constraints
    /// carry over.
    pub fn product(&self, other: &Chart) -> Result<Chart, GeomError> {
        let mut coords = self.0.coords.clone();
        for c in other.coords() {
            if coords.iter().any(|x| x == c) {
                return Err(GeomError::DuplicateCoordinate(c.clone()));
            }
            coords.push(c.clone());
        }
        let mut constraints = self.0.constraints.clone();
        constraints.extend(other.0.constraints.iter().cloned());
        Ok(Chart(Arc::new(ChartData {
            coords,
            constraints,
        })))
    }

    /// Parses a scalar expression whose bare identifiers must be coordinates
    /// of this chart. Applied identifiers stay opaque functions.
    pub fn parse_expr(&self, src: &str) -> Result<Expr, GeomError> {
        Ok(parse_strict(src, &self.coord_set())?)
    }

    /// Checks that every free variable of `e` is a coordinate.
    pub fn check_scalar(&self, e: &Expr) -> Result<(), GeomError> {
        for v in e.free_vars() {
            if !self.0.coords.iter().any(|c| *c == v) {
                return Err(GeomError::ForeignVariable(v, self.label()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label())
    }
}

pub(crate) fn same_chart(a: &Chart, b: &Chart) -> Result<(), GeomError> {
    if a == b {
        Ok(())
    } else {
        Err(GeomError::ChartMismatch(a.label(), b.label()))
    }
}
