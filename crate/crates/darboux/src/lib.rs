//! Symbolic-numeric toolkit for Darboux integrable exterior differential
//! systems: exact chart-level calculus for differential forms and
//! Pfaffian systems, quotient representations by Lie group actions, and
//! Cauchy problem solvers that integrate by quadrature when the acting
//! group is solvable.

pub mod eds;
pub mod geometry;
pub mod quotient;
pub mod symcore;
