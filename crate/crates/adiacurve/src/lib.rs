//! Driven two-level quantum systems viewed as plane curves.
//!
//! A driving protocol is a pair of real functions of time, the detuning
//! `Δ(t)` and the Rabi frequency `Ω(t)`. Integrating them componentwise
//! yields a plane curve whose differential geometry carries the physics:
//! the speed of the curve is the instantaneous eigenenergy splitting, the
//! turning angle is the polar angle of the field vector, and the curvature
//! is (twice) the nonadiabatic coupling per unit energy. This crate builds
//! those curves, computes their geometry, propagates the Schrödinger
//! equation in the bare and instantaneous eigenbases, reconstructs
//! protocols from a prescribed curvature profile, and classifies curves
//! (regularity, closure, simplicity, curvature extrema).
//!
//! The `parallel` feature (on by default) runs batch evaluations on a
//! rayon pool; without it everything falls back to sequential loops with
//! identical results.

pub mod batch;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod interp;
pub mod ode;
pub mod protocol;
pub mod quad;

pub use error::{Error, Result};
pub use protocol::{Catalog, DrivingProtocol, ProtocolSpec};
