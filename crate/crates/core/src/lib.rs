//! Periodic orbits of `x'' + V_x(t, x) = 0` on the circle.
//!
//! The pipeline searches a winding class for critical points of a discretized action,
//! refines them by shooting, classifies them by Floquet multipliers, computes Morse and
//! Bott indices and the twisting frequency, and turns catalogs of fundamental solutions
//! into mod-p lower bounds on subharmonic counts.

pub mod catalog;
pub mod counting;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod orbit_search;
pub mod potential;
pub mod spectral_index;

pub use error::{Error, Result};
