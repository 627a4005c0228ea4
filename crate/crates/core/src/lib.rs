//! Virtual element discretisation of the coupled Biot poroelasticity /
//! linear elasticity interface problem in displacement, fluid pressure and
//! total pressure form, on general polygonal meshes.
//!
//! The crate is organised bottom-up:
//!
//! - [`polykernel`]: scaled monomials, exact polygon moments, edge and
//!   volume quadrature.
//! - [`mesh`]: polygonal meshes, generators, interface merging with hanging
//!   nodes, quality diagnostics, JSON and VTK I/O.
//! - [`local_vem`]: per-element DOF layouts and projection matrices.
//! - [`forms`]: local bilinear forms, stabilisers and loads.
//! - [`manufactured`]: the benchmark problems and their exact data.
//! - [`assembly`]: global numbering, boundary conditions, block assembly,
//!   stationary and backward-Euler solves.
//! - [`verify`]: error proxies, rates and convergence studies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense numerical kernels index several arrays with one loop counter.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod forms;
pub mod local_vem;
pub mod manufactured;
pub mod mesh;
pub mod polykernel;
pub mod verify;

pub use assembly::{BlockSystem, DofMap, Solution, TransientState};
pub use error::{Result, VemError};
pub use forms::{EdgeStabScope, LocalForms, MaterialParams, StabilizerKind};
pub use local_vem::{DofLayout, LocalElementOperators, Space};
pub use manufactured::{CaseId, ManufacturedCase};
pub use mesh::{EdgeTag, MeshQualityReport, PolygonalMesh, Subdomain};
pub use verify::{ErrorReport, ErrorRow};
