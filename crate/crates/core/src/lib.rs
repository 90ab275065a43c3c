//! Orientation estimation for leaky-wave-antenna (LWA) equipped backscatter tags.
//!
//! A monostatic radar array illuminates a chipless tag whose LWA scans its main
//! lobe with frequency. The crate covers the full simulation chain:
//!
//! - [`special`]: Bessel `I0`/`I1`, `1F1(-1/2; 1; -x)` and the unbiased Rice
//!   amplitude solver.
//! - [`radiation`]: grating-LWA complex radiation pattern and per-subcarrier
//!   tabulation.
//! - [`geometry`]: array layout, tag angle, orientation-to-incidence mapping and
//!   feasibility sets.
//! - [`signal`]: free-space channel, maximum-ratio precoding, observation
//!   synthesis and sufficient statistics.
//! - [`estimators`]: MLE, P-MLE, A-MLE and RPA orientation estimators.
//! - [`experiments`]: the Monte Carlo harness (sigma sweep, heatmap, F sweep,
//!   coverage curves).
//! - [`validation`]: statistical self-checks shared by the CLI `selftest` and
//!   the acceptance suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod radiation;
pub mod rng;
pub mod signal;
pub mod special;
pub mod validation;

pub use error::{Error, Result};

/// Speed of light used for all wavelength conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Wavelength (m) of a carrier at `freq_hz`.
#[inline]
pub fn wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}
