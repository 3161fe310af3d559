//! Numerical search, certification, and counting of critical geometric
//! configurations: parallelotopes critically outscribed around smooth
//! strictly convex bodies, and Birkhoff-James orthonormal bases of smooth
//! norms, together with the closed-form topological lower bounds the
//! empirical counts are checked against.
//!
//! The pipeline: [`geometry`] compiles declarative body/norm specs into
//! closed-form support and gradient oracles; [`frames`] provides the
//! manifold of unit frames and the signed-permutation group acting on it;
//! [`parallelotope`] and [`bj`] define the two criticality residual systems;
//! [`solver`] runs deterministic multistart Newton refinement and merges
//! converged frames into classified orbits; [`grid`] is an independent
//! brute-force oracle for n = 2; [`bounds`] evaluates the exact integer
//! count bounds.

pub mod bj;
pub mod bounds;
pub mod frames;
pub mod geometry;
pub mod grid;
pub mod parallelotope;
pub mod report;
pub(crate) mod sampling;
pub mod solver;
pub mod svg;

pub use nalgebra;

pub use frames::{Frame, GroupElement, Normalization};
pub use geometry::{BodyOracle, ConvexBodySpec, NormOracle, NormSpec, SupportEvaluation};
pub use solver::{Census, CriticalOrbit, Problem, SolverConfig};
