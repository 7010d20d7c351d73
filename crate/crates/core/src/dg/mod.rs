//! Interior-penalty discontinuous Galerkin discretization on polytopal meshes.

mod penalty;
mod space;
mod stepper;
mod system;

pub use penalty::{face_penalty, harmonic_average, PenaltySide};
pub use space::{basis_dimension, DgSpace};
pub use stepper::{step_euler_semi_implicit, SemiImplicitEuler, SourceTerm};
pub use system::DgSystem;
