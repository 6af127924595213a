//! Homogenization of periodic, possibly degenerate diffusions.
//!
//! The crate simulates `dX = (b + εc) dt + σ dW` on the torus, estimates the
//! invariant measure, correctors and effective coefficients, computes the
//! range of the effective diffusivity from the topology of the support of the
//! invariant measure, and solves the limiting elliptic and parabolic problems
//! by Feynman–Kac Monte Carlo.

pub mod error;
pub mod ergodic;
pub mod fields;
pub mod fk;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod verify;

pub use error::{Assumption, Error, Result};
