//! Linear, mass-conserving, energy-stable finite element solver for a
//! diffuse-interface tumour growth model, built on the scalar auxiliary
//! variable (SAV) reformulation with backward Euler time stepping.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] and [`quadrature`]: structured simplicial meshes of boxes.
//! * [`fem`]: Lagrange spaces, sparse assembly, projections and norms.
//! * [`model`]: potential, proliferation and parameters.
//! * [`stepper`]: the coupled per-step linear system and the time loop.
//! * [`diagnostics`]: mass, energies and the discrete dissipation balance.
//! * [`harness`]: reference scenarios and convergence-rate studies.
//! * [`io`]: run configuration and output formats.

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod stepper;

pub use error::{Error, Result};
pub use fem::{FeFunction, FeSpace, Field, NormKind};
pub use mesh::{build_box_mesh, refine_uniform, BoxDomain, Mesh};
pub use model::ModelParams;
pub use stepper::{FemContext, State};
