//! Energy network re-dispatch as a quadratic unconstrained binary optimization problem.
//!
//! The crate builds the composite QUBO of a re-dispatch instance (one-hot and
//! adjacency hard terms, normalized unbalanced penalties for the power target and
//! line limits, production and switching cost), minimizes it with classical samplers,
//! and scales to large instances with a constraint-preserving alpha-expansion that
//! never leaves the feasible set.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the double-precision types used by the CLI and the data pipeline.

pub mod alphaexp;
pub mod data;
pub mod decomposers;
pub mod encodings;
pub mod matrix;
pub mod model;
pub mod qubo;
mod scalar;
pub mod solvers;

pub use scalar::Scalar;

pub use matrix::Matrix;
pub use model::{BitVector, Configuration, Layout};

pub type Qubo = qubo::Qubo<f64>;
pub type QuboBuilder = qubo::QuboBuilder<f64>;
pub type ProblemInstance = model::ProblemInstance<f64>;
pub type Multipliers = model::Multipliers<f64>;
pub type SolutionReport = model::SolutionReport<f64>;
pub type SolveResult = solvers::SolveResult<f64>;
pub type PenaltyBounds = encodings::PenaltyBounds<f64>;

pub type Qubo32 = qubo::Qubo<f32>;
pub type ProblemInstance32 = model::ProblemInstance<f32>;
