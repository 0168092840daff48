//! Pair-interaction master equations on the circle.
//!
//! The crate simulates three N-particle jump processes driven by binary
//! interactions (midpoint alignment with noise, choose-the-leader copying,
//! and Kac rotations), solves the one-particle kinetic equations they
//! converge to, and checks both against exact finite-state computations:
//!
//! - [`circle`]: angles, densities on the circle, noise laws and transforms.
//! - [`models`]: pair updates and the event-driven (Gillespie) simulator.
//! - [`oracle`]: the discretized master equation on a grid torus.
//! - [`kinetic`]: one-particle kinetic solvers.
//! - [`diagnostics`]: ensemble estimators and chaos metrics.
//! - [`invariant`]: invariant pair correlations of the copying dynamics.
//! - [`io`]: CSV / JSON-lines writers shared by the command-line driver.
//! - [`verify`]: executable acceptance scenarios.

pub mod circle;
pub mod diagnostics;
mod error;
pub mod invariant;
pub mod io;
pub mod kinetic;
pub mod models;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
