//! Lagrange finite element infrastructure: spaces, assembly, projections,
//! norms and linear solvers.

pub mod assembly;
pub mod function;
pub mod linalg;
pub mod norms;
pub mod projection;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_mass, assemble_nonlinear_load, assemble_stiffness, assemble_weighted_mass, integrate_composed,
    integrate_pointwise,
};
pub use function::{AffineField, ConstantField, FeFunction, Field, FnField};
pub use linalg::{SolverConfig, SolverKind};
pub use norms::{norm, norm_diff, NormKind};
pub use projection::{l2_projection, prolong, ritz_projection};
pub use space::FeSpace;
pub use sparse::CsrMatrix;
