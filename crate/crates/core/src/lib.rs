//! Simulation models for terahertz ultra-massive MIMO beamforming.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerical
//! code. File formats, scenario configs and the batch runner live in the
//! companion `thz-umimo-cli` crate.
//!
//! Modules, bottom-up:
//!
//! - [`propagation`]: spreading and molecular-absorption loss, path gain,
//!   background and re-radiation noise.
//! - [`geometry`]: ULA/URPA/UHPA/UCPA layouts, response vectors, element and
//!   array gain, Rayleigh distance.
//! - [`channel`]: multipath channel synthesis, LoS channels, DFT beamspace and
//!   beam selection.
//! - [`beamforming`]: codewords, steering and hierarchical codebooks, array
//!   factor and coverage, hybrid-architecture projection, spectral efficiency.
//! - [`training`]: exhaustive, one-sided, parallel and M-ary tree beam
//!   training with exact test accounting.
//! - [`wideband`]: spatial-wideband delays and beam squint.
//! - [`irs`]: IRS effective channel, alternating optimization, reflection
//!   codewords and the IRS beam-training protocols.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beamforming;
pub mod channel;
mod error;
pub mod geometry;
pub mod irs;
pub mod linalg;
pub mod propagation;
pub mod training;
pub mod wideband;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Speed of light used throughout, in m/s.
///
/// Rounded to 3e8 so that wavelengths come out as the round numbers used in
/// THz link budgets (1 mm at 0.3 THz).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Wavelength in meters for a carrier frequency in Hz.
pub fn wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency
}
