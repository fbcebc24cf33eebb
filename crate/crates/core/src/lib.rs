//! Mountain pass algorithm on projector cones for semilinear elliptic
//! problems on the unit square.
//!
//! The pieces, bottom-up:
//!
//! * [`mesh`]: structured triangulation and DOF bookkeeping
//! * [`fem`]: P1 operators, quadrature, SPD solves, Riesz gradients
//! * [`spectral`]: lowest eigenpairs of `−Δ + V` and the negative eigenspace
//! * [`optim`]: bounded limited-memory quasi-Newton inner solver
//! * [`problems`]: indefinite Schrödinger and coupled-system energies
//! * [`cones`]: projector cones and the peak selection `φ`
//! * [`mpa`]: the outer descent with admissible stepsizes
//! * [`config`] / [`experiments`]: run configuration and canned setups

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cones;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod mpa;
pub mod optim;
pub mod problems;
pub mod spectral;

pub use cones::{Cone, ConeSpec, PeakResult, VanishingPolicy};
pub use error::{MpaError, Result};
pub use fem::{Dual, Field, P1Space};
pub use mesh::Mesh;
pub use mpa::{run_mpa, MpaConfig, MpaTrace, RunStatus, StepRule};
pub use problems::{IndefiniteProblem, Problem, SystemProblem};
pub use spectral::{EigenMethod, SpectralBasis};
