//! Numerical toolkit for the periodic logarithmic Schrödinger equation
//! `-Δu + V(x)u = Q(x) u log u²` on the torus `[-L, L]^N`.
//!
//! The kernels are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix `f64`, which is what the solver tolerances are tuned for.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod functional;
pub mod grid;
pub mod nonlinearity;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{CoefficientSpec, LatticePoint, PeriodicGrid, TorusMask};
pub use scalar::Real;
pub use solver::{GlueSpec, MultibumpOptions, SolverOptions};

pub type Field = grid::GridField<f64>;
pub type Coefficients = grid::CoefficientPair<f64>;
pub type Energy = functional::EnergyBreakdown<f64>;
pub type Report = solver::SolveReport<f64>;
pub type MultibumpReport = solver::MultibumpReport<f64>;
pub type AnnulusReport = solver::AnnulusReport<f64>;
pub type Decomposition = analysis::BumpDecomposition<f64>;
