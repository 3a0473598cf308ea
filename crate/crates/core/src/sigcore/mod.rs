//! Numeric foundations shared by the transmitter, channel and receiver.

mod dft;
mod fft;
mod ops;
mod rng;
mod rrc;
mod waveform;

pub use dft::{dft_full, dft_sparse, idft_full, SparseDft};
pub use fft::Fft;
pub use ops::{awgn, freq_shift, ideal_fractional_delay, NOISE_DISABLED};
pub use rng::Rng;
pub use rrc::RrcFilter;
pub use waveform::ComplexWaveform;

pub type C64 = num_complex::Complex<f64>;

/// `exp(j*theta)` evaluated through libm.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(libm::cos(theta), libm::sin(theta))
}

/// Signed frequency of DFT bin `k` for an `n`-point transform, as a fraction
/// of the sample rate in `[-0.5, 0.5)`.
#[inline]
pub fn bin_fraction(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}
