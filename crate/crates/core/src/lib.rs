//! Test-particle simulation of chaotic E×B drift in a magnetized plasma,
//! with local Hamiltonian control terms that build transport barriers.
//!
//! The crate is organised around four pieces:
//!
//! * [`field`]: the phenomenological multi-mode potential `V(x, y, t)` and
//!   its analytic derivatives.
//! * [`control`]: the exact control term `F = V(x + ∂_y f, y, t) − V` and its
//!   Bessel-series truncation to a few temporal harmonics.
//! * [`dynamics`]: adaptive Runge–Kutta integration of the drift equations,
//!   stroboscopic sampling, escape detection and seeded ensembles.
//! * [`diagnostics`]: lattice averages, energy-cost ratios, comparison
//!   tables, diffusion fits and contour grids.
//!
//! The `plots` feature adds PNG rendering of Poincaré sections and contour
//! maps in [`plot`].
//!
//! Ensemble and lattice loops run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to plain iterators otherwise.

pub mod config;
pub mod control;
pub mod diagnostics;
pub mod dynamics;
pub mod field;
pub mod par;
#[cfg(feature = "plots")]
pub mod plot;

mod error;

pub use control::{BesselError, ControlConfig, ControlMode, ControlledField};
pub use error::{Error, Result};
pub use field::{DriftField, FieldSample, PotentialSpec};
