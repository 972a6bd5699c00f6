//! GKP-type quantum error-correcting codes on the planar rotor U(1), the rigid
//! rotor SO(3) and the linear rotor S².
//!
//! The crate is organised bottom-up:
//!
//! - [`rotations`]: quaternion rotations, finite subgroups of SO(3), cosets and
//!   Voronoi cells.
//! - [`wigner`]: Wigner D-matrices, Clebsch-Gordan coefficients, spherical
//!   harmonics and Haar quadrature.
//! - [`reps`]: irrep tables of the finite subgroups, branching rules, twirls and
//!   the classification of correctable momentum kicks.
//! - [`planar`]: an exact discretised model of planar-rotor codes, gates,
//!   syndrome extraction and initialisation.
//! - [`molecular`]: rigid-rotor codes, ideal and damped codewords, recovery and
//!   the leakage/distortion asymptotics.
//! - [`sphere`]: linear-rotor codes, check operators, twirled harmonics and
//!   spherical designs.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod molecular;
pub mod planar;
pub mod reps;
pub mod rotations;
pub mod sphere;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Schema version stamped into every serialised report.
pub const SCHEMA_VERSION: u32 = 1;
