//! Finite element spaces and operator assembly.

pub mod assembly;
pub mod basis;
pub mod quadrature;
pub mod space;

pub use assembly::{
    apply_convection, assemble_buoyancy, assemble_convection_matrix, assemble_divergence, assemble_load_scalar,
    assemble_load_vector, assemble_mass, assemble_stiffness, block_diag2,
};
pub use quadrature::QuadratureRule;
pub use space::{FeSpace, FieldVector, SpaceKind};
