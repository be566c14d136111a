//! Time-fractional diffusion `∂_t^β u = L u` on bounded domains with
//! Dirichlet boundary conditions, solved by eigenfunction series, by Monte
//! Carlo over killed diffusions run on an inverse stable clock, and (for
//! `β = 1/2`) by iterated Brownian motion and an equivalent fourth-order
//! problem.

// Negated comparisons are used so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod quad;
pub mod specfun;
pub mod spectral;
pub mod stochastic;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use specfun::{FracOrder, MlValue};
pub use spectral::{OperatorSpec, Point, SpectralCoefficients, SpectralModel};
