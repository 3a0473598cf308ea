//! Baseband simulation core for downstream coherent point-to-multi-point PON
//! timing recovery.
//!
//! The receiver estimates its sampling phase with a Godard detector that only
//! looks at a handful of DFT bins around the half-baud frequency, and removes
//! residual chromatic dispersion from those bins alone before the estimate is
//! fed back to a Farrow interpolator. Everything around it (16QAM source, RRC
//! shaping, subcarrier multiplexing, fiber dispersion, timing impairments and
//! metrics) exists to exercise and measure that loop.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental math goes
//! through `libm`, so a given seed reproduces bit-identical results on every
//! platform.
#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod metrics;
pub mod rxdsp;
pub mod scenario;
pub mod sigcore;
pub mod txchain;

pub use error::{Error, Result};
pub use sigcore::{ComplexWaveform, C64};
