//! Cahn-Hilliard-Navier-Stokes solver on a MAC grid with a Flory-Huggins
//! logarithmic potential.
//!
//! The time stepper is a second-order modified Crank-Nicolson scheme whose
//! phase field stays strictly inside `(-1, 1)`. Spatial operators live in
//! [`grid`], nonlinear composites in [`discrete_ops`], the logarithmic
//! machinery in [`potential`], and the stepper in [`scheme`]. The
//! [`verification`] module holds a manufactured-solution harness.

pub mod discrete_ops;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod potential;
pub mod scheme;
pub mod spectral;
pub mod verification;

pub mod cli;

pub use error::{ChnsError, Result};
pub use grid::{BcMode, Field, MacVelocity, Stagger};
