//! Capacity lower bounds for the nonlinear optical fiber channel by sequence selection.
//!
//! The crate simulates dual-polarization WDM transmission with a split-step
//! Fourier solver of the Manakov equation, screens candidate symbol blocks by
//! the amount of nonlinear interference they generate, and evaluates
//! achievable information rates for the resulting biased source, corrected
//! for the rate lost to the rejection step.
//!
//! Module map:
//!
//! - [`signal`]: constellations, symbol sources, sinc modulation and WDM multiplexing.
//! - [`fiber`]: split-step propagation, EDFA and ideal distributed Raman noise.
//! - [`dsp`]: dispersion compensation, digital backpropagation, matched filtering,
//!   mean phase removal.
//! - [`shaping`]: Maxwell-Boltzmann shaping, enumerative sphere shaping, PAS sources.
//! - [`selection`]: the rejection-sampling screen that forms the biased source.
//! - [`air`]: mismatched AWGN achievable rates and the selection lower bound.
//! - [`experiments`]: configuration, sweeps, persistence and the CLI back end.

pub mod air;
pub mod dsp;
mod error;
pub mod experiments;
mod fft;
pub mod fiber;
pub mod selection;
pub mod shaping;
pub mod signal;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
