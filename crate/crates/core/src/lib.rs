//! Linearized cavity optomechanics with photothermal back-action.
//!
//! The crate predicts homodyne coherent-response spectra, quantum and thermal
//! noise spectra, and pulsed time-domain responses of a driven
//! optomechanical cavity, and inverts measured spectra to extract the coupling
//! rate, the mechanical decoherence rate and the phonon occupancy.
//!
//! All frequencies and rates are angular (rad/s). Use [`params::hz`] and
//! [`params::to_hz`] at the boundaries.

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherent;
pub mod covariance;
pub mod error;
pub mod fitting;
pub mod grid;
pub mod io;
pub mod lm;
pub mod params;
pub mod response;
pub mod spectra;
pub mod timedomain;

pub use error::{Error, Result};
pub use params::{derive, hz, presets, to_hz, DerivedRates, PhysicalConstants, SystemParams};

/// Library version recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
