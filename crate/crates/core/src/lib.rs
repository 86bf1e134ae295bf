//! photonkit — simulation and analysis for single-photon-source
//! characterization.
//!
//! The crate covers the desk-scale pipeline end to end: Monte Carlo photon
//! time-tag streams from a two-level emitter routed through HBT or HOM
//! optics with realistic detectors ([`montecarlo`]), high-throughput
//! coincidence correlation ([`correlator`]), closed-form emitter and
//! interferometer models ([`models`], [`hom`]), weighted nonlinear
//! least-squares fitting with the standard characterization recipes
//! ([`fitter`]), and fiber-coupling / photon-budget arithmetic
//! ([`coupling`]).
//!
//! Unit conventions: event timestamps are integer picoseconds, model-level
//! delays are floating-point nanoseconds, rates are counts per second,
//! lifetimes are nanoseconds, coherence times are picoseconds and pump
//! powers are microwatts. Conversions are always explicit.

// validation uses `!(x > 0.0)` so NaN fails the check too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlator;
pub mod coupling;
pub mod error;
pub mod fitter;
pub mod hom;
pub mod io;
pub mod models;
pub mod montecarlo;
pub mod rng;
pub mod tags;

pub use error::{Error, Result};
pub use tags::TagStream;
