//! Continuous Lagrange finite element spaces on quadrilateral meshes.

mod assembly;
mod element;
mod function;
mod space;

pub use assembly::{
    assemble_boundary_functional, assemble_mass, assemble_stiffness, assemble_volume_functional,
};
pub use element::{LagrangeElement, LocalObject};
pub use function::{interpolate, transfer, FeFunction, MapPoint};
pub use space::FeSpace;

pub use crate::sparse::ConstraintSet;

use thiserror::Error;

use crate::mesh::MeshError;
use crate::sparse::LinAlgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("unsupported polynomial degree {0} (only 1 and 2)")]
    UnsupportedDegree(usize),
    #[error("coefficient vector has length {actual}, space has {expected} dofs")]
    LengthMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Constraints(#[from] LinAlgError),
}
