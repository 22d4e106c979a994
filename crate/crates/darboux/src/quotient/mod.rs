//! Quotient representations of Pfaffian systems: a pair of factor systems
//! on disjoint charts carrying actions of a common Lie group, a diagonal
//! action on the product, and a quotient map under which the sum of the
//! factors descends to the system of interest.
//!
//! [`GroupAction`] captures a Lie algebra of infinitesimal generators with
//! exact structure constants and a solvability flag. [`sum_system`] forms
//! the direct sum of the factor systems on the product chart, and
//! [`QuotientRepresentation`] bundles the full data after validating its
//! dimension count, factor integrability, and submersion properties. The
//! `verify_*` operations check the laws a representation must satisfy:
//! symmetry of the actions, transversality, descent of generators and of
//! the singular systems through the quotient map, and the pushforward law
//! identifying annihilators upstairs and downstairs.

mod action;
mod rep;

#[cfg(test)]
pub(crate) mod fixtures;

pub use action::{verify_symmetry, verify_transversality, GroupAction};
pub use rep::{
    product_chart, sum_system, verify_annihilator_pushforward, verify_quotient_map,
    verify_singular_correspondence, QuotientMapReport, QuotientRepresentation,
};

use crate::eds::EdsError;
use crate::geometry::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuotientError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Eds(#[from] EdsError),
    #[error("factor charts share the coordinate `{0}`")]
    SharedCoordinate(String),
    #[error("generators span rank {rank} instead of {expected}")]
    DependentGenerators { rank: usize, expected: usize },
    #[error("bracket of generators {i} and {j} leaves their span")]
    NotClosed { i: usize, j: usize },
    #[error("bracket of generators {i} and {j} has non-constant coefficient {value} on generator {k}")]
    NotConstant {
        i: usize,
        j: usize,
        k: usize,
        value: String,
    },
    #[error("Jacobi identity fails on generators ({i}, {j}, {k}) with residual {residual:.3e}")]
    Jacobi {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },
    #[error("group dimensions differ: {left} vs {right}")]
    GroupSizeMismatch { left: usize, right: usize },
    #[error("structure constants differ at ({i}, {j}, {k}): {left} vs {right}")]
    StructureMismatch {
        i: usize,
        j: usize,
        k: usize,
        left: f64,
        right: f64,
    },
    #[error(
        "product dimension {product} minus group dimension {r} must equal the target dimension {target}"
    )]
    DimensionMismatch {
        product: usize,
        r: usize,
        target: usize,
    },
    #[error("quotient map has rank {rank} at probes, not a submersion onto dimension {dim}")]
    NotSubmersion { rank: usize, dim: usize },
    #[error("factor system retains rank {rank} under repeated derivation")]
    FactorNotIntegrable { rank: usize },
}
