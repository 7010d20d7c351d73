//! Fisher-Kolmogorov protein spreading solvers: an interior-penalty
//! discontinuous Galerkin method on polytopal meshes, a Crank-Nicolson
//! scheme on connectome graphs, and the SUVR mapping / Braak staging
//! post-processing that compares them with PET data.

pub mod dg;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod linsolve;
pub mod quadrature;
pub mod scheme;
pub mod sparse;
pub mod staging;
pub mod trajectory;

pub use error::{Error, Result};
