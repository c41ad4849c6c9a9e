//! Time-periodic Westervelt equation on a 2D disk: multiharmonic forward
//! solves, linearized sensitivities with an exact discrete adjoint, the
//! all-at-once range-invariance machinery, regularized frozen-Newton
//! reconstruction of `(s, b, eta)` and the source admissibility checker.
//!
//! The crate is organised bottom-up:
//!
//! - [`fem`]: disk meshing, P1 assembly and complex Robin–Helmholtz solves
//! - [`harmonics`]: truncated multiharmonic fields and their product algebra
//! - [`forward`]: parameter transform, boundary sources, fixed-point solver
//! - [`sensitivity`]: linearized forward map `K` and its adjoint
//! - [`aao`]: all-at-once operator, effective increments, penalty projection
//! - [`inversion`]: noise model, frozen Newton iteration, stopping rule
//! - [`admissibility`]: impedance spectrum of the disk, poles, Laplace
//!   transforms of the time profiles, Bessel oracle
//! - [`experiment`]: case configuration, phantom synthesis, end-to-end runs

pub mod aao;
pub mod admissibility;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod forward;
pub mod harmonics;
pub mod inversion;
pub mod sensitivity;

pub use error::{Error, Result};
pub use num_complex::Complex64;
