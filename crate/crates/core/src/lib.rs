//! Boundary-integral solver for the Laplace equation in a planar domain with
//! two small, moderately close holes: Neumann data on the holes, Dirichlet
//! data on the outer boundary.
//!
//! The crate provides
//! - curves, configurations and admissibility checks ([`geometry`]),
//! - a spectrally accurate Nyström discretization ([`quadrature`],
//!   [`potentials`]),
//! - a direct solver on physical geometry ([`mixed_solver`]) and the
//!   two-parameter system on fixed reference curves ([`rescaled`]),
//! - macroscopic, microscopic and boundary-layer views of the solution
//!   ([`representation`]),
//! - the low-order expansion coefficients and their finite-difference
//!   checks ([`expansion`]),
//! - an experiment driver writing CSV tables ([`harness`]).

pub mod data;
pub mod error;
pub mod expansion;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mixed_solver;
pub mod order;
pub mod potentials;
pub mod quadrature;
pub mod representation;
pub mod rescaled;

pub use error::{Error, Result};
pub use geometry::{ParametrizedCurve, Point, ProblemConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
