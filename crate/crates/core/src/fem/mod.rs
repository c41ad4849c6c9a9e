//! Disk meshing, P1 assembly and complex Robin–Helmholtz solves.

pub mod assembly;
pub mod io;
pub mod mesh;
pub mod solve;
pub mod sparse;

pub use assembly::{assemble, AssembledOperators};
pub use mesh::{generate_disk_mesh, BoundaryEdge, Mesh2D, SigmaArc};
pub use solve::{solve_robin_helmholtz, MassTreatment, RobinHelmholtz};
pub use sparse::Csr;
