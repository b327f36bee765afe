//! Numerical solvers for coupled systems made of an evolution equation, a
//! history-dependent quasivariational inequality and a parabolic variational
//! inequality, together with a P1 finite-element frictional contact model
//! with long memory, damage and wear.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod box_qp;
pub mod contact2d;
pub mod error;
pub mod history;
pub mod problem;
pub mod spaces;
pub mod stepper;
pub mod verify;
pub mod vi;

pub use error::{Error, Result};
pub use problem::{contraction_constants, validate_hypotheses, Constants, ContractionConstants, DqviProblem, JSpec};
pub use spaces::{Coeffs, ConvexSet, DiscreteSpace, Metric, NormKind, SpaceLabel};
