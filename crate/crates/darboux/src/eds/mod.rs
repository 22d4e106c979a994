//! Pfaffian systems and their structure theory: derived flags, first
//! integrals, hyperbolic and decomposable coframe classification, singular
//! systems, the Darboux integrability test, and characteristic tests for
//! curves.
//!
//! A [`PfaffianSystem`] is a constant-rank span of 1-forms on a chart. Its
//! derived system keeps the combinations whose exterior derivative lies in
//! the algebraic ideal; iterating yields the derived flag and the largest
//! completely integrable subsystem ([`PfaffianSystem::infinity`]). Given a
//! full [`Coframe`] adapted to the system, [`classify_structure`] expands
//! the structure equations, recognizes the hyperbolic class-s and
//! decomposable patterns, extracts the two second-order torsion invariants
//! on 7-dimensional charts, and assembles the singular pair (hV, cV) from
//! which [`is_darboux_integrable`] decides integrability by rank counting.

#[cfg(test)]
pub(crate) mod fixtures;
mod nonchar;
mod pfaffian;
mod structure;

pub use nonchar::{is_noncharacteristic, NoncharReport};
pub(crate) use pfaffian::require_constant;
pub use pfaffian::{combined_rank, DerivedFlag, PfaffianSystem};
pub use structure::{
    classify_structure, is_darboux_integrable, Classification, Coframe, DarbouxVerdict,
    StructureReport, TorsionTerm,
};

use crate::geometry::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdsError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("generators must be 1-forms, found a {0}-form")]
    GeneratorDegree(usize),
    #[error("symbolic elimination disagrees with numeric probing: {0}")]
    Reduction(String),
    #[error("derived flag did not stabilize after {0} steps")]
    FlagDepth(usize),
    #[error("coframe has {count} forms on a {dim}-dimensional chart")]
    CoframeCount { count: usize, dim: usize },
    #[error("coframe block {0} is empty")]
    CoframeBlock(&'static str),
    #[error("coframe has generic rank {rank} on a {dim}-dimensional chart")]
    CoframeDeficient { rank: usize, dim: usize },
    #[error("the theta block of the coframe does not span the system: {0}")]
    ThetaSpanMismatch(String),
    #[error("{0} does not contain the system it should refine")]
    NotContaining(String),
    #[error("curve is not an integral curve: residual {residual:.3e} at parameter {param}")]
    NotIntegralCurve { residual: f64, param: f64 },
}
