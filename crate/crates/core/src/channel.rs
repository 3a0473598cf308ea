//! Fiber and clock impairments.
//!
//! Chromatic dispersion is modeled as the second-order all-pass
//! `exp(-j*phi(f))` with `phi(f) = pi * lambda^2 * D * L * f^2 / c`.
//! Propagation applies `exp(-j*phi)`, compensation `exp(+j*phi)`, everywhere
//! in the crate.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{param_err, Result};
use crate::sigcore::{awgn, bin_fraction, cis, ideal_fractional_delay, ComplexWaveform, Fft, Rng, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Single-coefficient fiber dispersion model.
///
/// `length_km` is normally non-negative. A negative value is accepted where
/// it describes a *residual* (over-compensated) dispersion, as used by
/// the receiver's in-loop compensation; [`apply_cd`] rejects it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
    pub length_km: f64,
}

impl FiberSpec {
    pub const DEFAULT_DISPERSION_PS_NM_KM: f64 = 16.0;
    pub const DEFAULT_WAVELENGTH_NM: f64 = 1550.0;

    pub fn new(dispersion_ps_nm_km: f64, wavelength_nm: f64, length_km: f64) -> Result<Self> {
        let f = FiberSpec {
            dispersion_ps_nm_km,
            wavelength_nm,
            length_km,
        };
        f.validate_coefficients()?;
        if !(length_km >= 0.0) {
            return Err(param_err!("fiber length must be >= 0 km, got {length_km}"));
        }
        Ok(f)
    }

    /// Standard single-mode fiber (16 ps/nm/km at 1550 nm).
    pub fn standard(length_km: f64) -> Result<Self> {
        Self::new(
            Self::DEFAULT_DISPERSION_PS_NM_KM,
            Self::DEFAULT_WAVELENGTH_NM,
            length_km,
        )
    }

    /// Same dispersion and wavelength, different (possibly negative) length.
    pub fn with_length(self, length_km: f64) -> Self {
        FiberSpec { length_km, ..self }
    }

    pub fn validate_coefficients(&self) -> Result<()> {
        if !(self.dispersion_ps_nm_km > 0.0 && self.dispersion_ps_nm_km.is_finite()) {
            return Err(param_err!(
                "dispersion must be positive, got {}",
                self.dispersion_ps_nm_km
            ));
        }
        if !(self.wavelength_nm > 0.0 && self.wavelength_nm.is_finite()) {
            return Err(param_err!("wavelength must be positive, got {}", self.wavelength_nm));
        }
        if !self.length_km.is_finite() {
            return Err(param_err!("fiber length must be finite"));
        }
        Ok(())
    }

    /// `pi * lambda^2 * D * L / c` in s^2, so that `phi(f) = coefficient * f^2`.
    pub fn cd_coefficient(&self) -> f64 {
        let lambda = self.wavelength_nm * 1e-9;
        // ps/(nm km) -> s/m^2
        let d = self.dispersion_ps_nm_km * 1e-6;
        let l = self.length_km * 1e3;
        PI * lambda * lambda * d * l / SPEED_OF_LIGHT
    }

    /// Group delay of the dispersion all-pass at absolute frequency `f_hz`,
    /// in seconds (`phi'(f) / 2 pi`).
    pub fn group_delay_s(&self, f_hz: f64) -> f64 {
        self.cd_coefficient() * f_hz / PI
    }
}

/// Dispersion phase `phi(f)` in radians.
pub fn cd_phase(f_hz: f64, fiber: &FiberSpec) -> f64 {
    fiber.cd_coefficient() * f_hz * f_hz
}

/// Propagates `x` (centered at 0 Hz) through `fiber`.
pub fn apply_cd(x: &ComplexWaveform, fiber: &FiberSpec) -> Result<ComplexWaveform> {
    apply_cd_at(x, fiber, 0.0)
}

/// Propagates `x` whose 0 Hz corresponds to absolute offset `center_hz` from
/// the optical carrier.
pub fn apply_cd_at(x: &ComplexWaveform, fiber: &FiberSpec, center_hz: f64) -> Result<ComplexWaveform> {
    FiberSpec::new(fiber.dispersion_ps_nm_km, fiber.wavelength_nm, fiber.length_km)?;
    cd_all_pass(x, fiber, center_hz, -1.0)
}

/// Multiplies the spectrum of `x` by `exp(sign * j * phi(center + f))`
/// over its full-length DFT.
pub(crate) fn cd_all_pass(
    x: &ComplexWaveform,
    fiber: &FiberSpec,
    center_hz: f64,
    sign: f64,
) -> Result<ComplexWaveform> {
    fiber.validate_coefficients()?;
    if x.len() < 8 {
        return Err(param_err!(
            "dispersion filter needs at least 8 samples, got {}",
            x.len()
        ));
    }
    if fiber.length_km == 0.0 {
        return Ok(x.clone());
    }
    let n = x.len();
    let fs = x.sample_rate_hz();
    let plan = Fft::new(n);
    let mut spec: Vec<C64> = x.samples().to_vec();
    plan.forward(&mut spec);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = center_hz + bin_fraction(k, n) * fs;
        *v *= cis(sign * cd_phase(f, fiber));
    }
    plan.inverse(&mut spec);
    Ok(x.with_samples(spec))
}

/// Sampling-clock impairment seen by the receiver ADC.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimingImpairment {
    pub initial_offset_symbols: f64,
    pub step_offset_symbols: f64,
    pub step_at_sample: usize,
    pub drift_ppm: f64,
}

impl TimingImpairment {
    pub fn validate(&self, len: usize) -> Result<()> {
        if !(libm::fabs(self.initial_offset_symbols) < 0.5) {
            return Err(param_err!("initial offset must be within (-0.5, 0.5) symbols"));
        }
        if !(libm::fabs(self.step_offset_symbols) < 0.5) {
            return Err(param_err!("step offset must be within (-0.5, 0.5) symbols"));
        }
        if self.step_at_sample > len {
            return Err(param_err!(
                "step at sample {} beyond waveform of {len} samples",
                self.step_at_sample
            ));
        }
        if !self.drift_ppm.is_finite() {
            return Err(param_err!("drift must be finite"));
        }
        Ok(())
    }

    /// True sampling delay in symbols at sample `n`.
    pub fn phase_at(&self, n: usize, sps: usize) -> f64 {
        let mut d = self.initial_offset_symbols;
        if n >= self.step_at_sample {
            d += self.step_offset_symbols;
        }
        d + self.drift_ppm * 1e-6 * n as f64 / sps as f64
    }
}

/// Delays `x` by the impairment's time-varying offset and returns the exact
/// per-sample delay in symbols (positive = received late).
pub fn inject_timing(x: &ComplexWaveform, imp: &TimingImpairment, sps: usize) -> Result<(ComplexWaveform, Vec<f64>)> {
    if sps == 0 {
        return Err(param_err!("samples per symbol must be positive"));
    }
    imp.validate(x.len())?;
    let trace: Vec<f64> = (0..x.len()).map(|n| imp.phase_at(n, sps)).collect();
    if imp.drift_ppm != 0.0 {
        let delays: Vec<f64> = trace.iter().map(|d| d * sps as f64).collect();
        return Ok((variable_delay(x, &delays), trace));
    }
    let sps_f = sps as f64;
    let before = ideal_fractional_delay(x, imp.initial_offset_symbols * sps_f)?;
    let split = imp.step_at_sample;
    if imp.step_offset_symbols == 0.0 || split >= x.len() {
        return Ok((before, trace));
    }
    let after = ideal_fractional_delay(x, (imp.initial_offset_symbols + imp.step_offset_symbols) * sps_f)?;
    let mut out = before.into_samples();
    out[split..].copy_from_slice(&after.samples()[split..]);
    Ok((x.with_samples(out), trace))
}

/// Blackman-windowed sinc interpolation for a delay that changes per sample.
/// Samples outside the buffer count as zero.
fn variable_delay(x: &ComplexWaveform, delays: &[f64]) -> ComplexWaveform {
    const HALF: i64 = 32;
    let src = x.samples();
    let len = src.len() as i64;
    let out = delays
        .iter()
        .enumerate()
        .map(|(n, d)| {
            let t = n as f64 - d;
            let base = libm::floor(t);
            let frac = t - base;
            let base = base as i64;
            let mut acc = C64::new(0.0, 0.0);
            for m in (-HALF + 1)..=HALF {
                let idx = base + m;
                if idx < 0 || idx >= len {
                    continue;
                }
                let u = m as f64 - frac;
                acc += src[idx as usize] * windowed_sinc(u, HALF as f64);
            }
            acc
        })
        .collect();
    x.with_samples(out)
}

fn windowed_sinc(u: f64, half: f64) -> f64 {
    if libm::fabs(u) >= half {
        return 0.0;
    }
    let sinc = if u == 0.0 { 1.0 } else { libm::sin(PI * u) / (PI * u) };
    let w = 0.42 + 0.5 * libm::cos(PI * u / half) + 0.08 * libm::cos(2.0 * PI * u / half);
    sinc * w
}

/// AWGN at `snr_db`; `None` disables noise.
pub fn add_noise(x: &ComplexWaveform, snr_db: Option<f64>, rng: &mut Rng) -> Result<ComplexWaveform> {
    match snr_db {
        None => Ok(x.clone()),
        Some(snr) => awgn(x, snr, rng),
    }
}
