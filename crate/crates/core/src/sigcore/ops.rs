use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{bin_fraction, cis, ComplexWaveform, Fft, Rng, C64};
use crate::error::{param_err, Error, Result};

/// SNR value that disables noise injection.
pub const NOISE_DISABLED: f64 = f64::INFINITY;

/// Multiplies by `exp(j*2*pi*f*n/fs)`.
pub fn freq_shift(x: &ComplexWaveform, f_shift_hz: f64) -> Result<ComplexWaveform> {
    let fs = x.sample_rate_hz();
    if !(libm::fabs(f_shift_hz) < fs / 2.0) {
        return Err(param_err!("shift {f_shift_hz} Hz beyond Nyquist for fs = {fs} Hz"));
    }
    if f_shift_hz == 0.0 {
        return Ok(x.clone());
    }
    let step = f_shift_hz / fs;
    let out = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            // reduce the cycle count before scaling so large n keeps full precision
            let cycles = step * n as f64;
            let frac = cycles - libm::floor(cycles);
            *s * cis(2.0 * PI * frac)
        })
        .collect();
    Ok(x.with_samples(out))
}

/// Circular band-limited delay by `delay_samples` (may be fractional or
/// negative), applied as a linear phase over the full-length DFT.
pub fn ideal_fractional_delay(x: &ComplexWaveform, delay_samples: f64) -> Result<ComplexWaveform> {
    if !delay_samples.is_finite() {
        return Err(param_err!("delay must be finite"));
    }
    if x.len() < 8 {
        return Err(param_err!("fractional delay needs at least 8 samples, got {}", x.len()));
    }
    if delay_samples == 0.0 {
        return Ok(x.clone());
    }
    let n = x.len();
    let plan = Fft::new(n);
    let mut spec: Vec<C64> = x.samples().to_vec();
    plan.forward(&mut spec);
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= cis(-2.0 * PI * bin_fraction(k, n) * delay_samples);
    }
    plan.inverse(&mut spec);
    Ok(x.with_samples(spec))
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the mean
/// power of `x`. [`NOISE_DISABLED`] returns the input unchanged.
pub fn awgn(x: &ComplexWaveform, snr_db: f64, rng: &mut Rng) -> Result<ComplexWaveform> {
    if snr_db == NOISE_DISABLED {
        return Ok(x.clone());
    }
    if snr_db.is_nan() {
        return Err(param_err!("SNR must be a number"));
    }
    let power = x.mean_power();
    if !(power > 0.0) {
        return Err(Error::ZeroPower);
    }
    let rail_sigma = libm::sqrt(power / libm::pow(10.0, snr_db / 10.0) / 2.0);
    let out = x
        .samples()
        .iter()
        .map(|s| *s + C64::new(rng.gaussian(), rng.gaussian()) * rail_sigma)
        .collect();
    Ok(x.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::dft_full;

    fn noise_wave(n: usize, seed: u64) -> ComplexWaveform {
        let mut rng = Rng::new(seed);
        let s = (0..n).map(|_| C64::new(rng.gaussian(), rng.gaussian())).collect();
        ComplexWaveform::new(s, 1.0e9).unwrap()
    }

    fn max_diff(a: &ComplexWaveform, b: &ComplexWaveform) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn shift_identity_inverse_and_energy() {
        let x = noise_wave(4096, 1);
        assert_eq!(freq_shift(&x, 0.0).unwrap(), x);
        let there = freq_shift(&x, 123.4e6).unwrap();
        let back = freq_shift(&there, -123.4e6).unwrap();
        assert!(max_diff(&back, &x) < 1e-12);
        assert!(((there.energy() - x.energy()) / x.energy()).abs() < 1e-10);
        assert!(freq_shift(&x, 0.6e9).is_err());
    }

    #[test]
    fn shifted_tone_peaks_at_new_bin() {
        let n = 256;
        let fs = 256.0;
        let tone: Vec<C64> = (0..n).map(|i| cis(2.0 * PI * 10.0 * i as f64 / fs)).collect();
        let x = ComplexWaveform::new(tone, fs).unwrap();
        let y = freq_shift(&x, 17.0).unwrap();
        let spec = dft_full(y.samples()).unwrap();
        let peak = (0..n)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        assert_eq!(peak, 27);
    }

    #[test]
    fn delay_identity_integer_shift_and_inverse() {
        let x = noise_wave(512, 2);
        assert!(max_diff(&ideal_fractional_delay(&x, 0.0).unwrap(), &x) < 1e-12);
        let d1 = ideal_fractional_delay(&x, 1.0).unwrap();
        for i in 0..x.len() {
            let want = x.samples()[(i + x.len() - 1) % x.len()];
            assert!((d1.samples()[i] - want).norm() < 1e-10);
        }
        let there = ideal_fractional_delay(&x, 0.25).unwrap();
        let back = ideal_fractional_delay(&there, -0.25).unwrap();
        assert!(max_diff(&back, &x) < 1e-10);
        assert!(((there.energy() - x.energy()) / x.energy()).abs() < 1e-10);
    }

    #[test]
    fn noise_disabled_is_identity() {
        let x = noise_wave(64, 3);
        let mut rng = Rng::new(0);
        assert_eq!(awgn(&x, NOISE_DISABLED, &mut rng).unwrap(), x);
    }

    #[test]
    fn measured_snr_matches_request() {
        let x = noise_wave(1_000_000, 4);
        for snr in [0.0, 10.0, 25.0] {
            let mut rng = Rng::new(11);
            let y = awgn(&x, snr, &mut rng).unwrap();
            let noise: f64 = y
                .samples()
                .iter()
                .zip(x.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let measured = 10.0 * libm::log10(x.energy() / noise);
            assert!((measured - snr).abs() <= 0.2, "requested {snr}, got {measured}");
        }
    }

    #[test]
    fn noise_is_seed_deterministic_and_needs_power() {
        let x = noise_wave(256, 5);
        let a = awgn(&x, 12.0, &mut Rng::new(9)).unwrap();
        let b = awgn(&x, 12.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        let zero = ComplexWaveform::new(alloc::vec![C64::new(0.0, 0.0); 16], 1.0).unwrap();
        assert_eq!(awgn(&zero, 10.0, &mut Rng::new(1)), Err(Error::ZeroPower));
    }
}
