//! OLT-side transmitter: PRBS, Gray 16QAM, RRC shaping, digital subcarrier
//! multiplexing and per-slot dispersion pre-compensation.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{cd_all_pass, FiberSpec};
use crate::error::{param_err, Error, Result};
use crate::sigcore::{freq_shift, ComplexWaveform, Fft, Rng, RrcFilter, C64};

/// Shaping filter length used throughout unless overridden.
pub const DEFAULT_SPAN_SYMBOLS: usize = 32;

/// Geometry of a digital-subcarrier-multiplexed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DscmPlan {
    pub n_subcarriers: usize,
    pub baud_per_sc_hz: f64,
    pub roll_off: f64,
    pub sc_center_freqs_hz: Vec<f64>,
    pub aggregate_sample_rate_hz: f64,
}

impl DscmPlan {
    pub const DEFAULT_AGGREGATE_RATE_HZ: f64 = 128e9;

    /// Evenly spaced subcarriers at `baud * (1 + roll_off)`, symmetric about
    /// 0 Hz.
    pub fn new(
        n_subcarriers: usize,
        baud_per_sc_hz: f64,
        roll_off: f64,
        aggregate_sample_rate_hz: f64,
    ) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(param_err!("need at least one subcarrier"));
        }
        if !(baud_per_sc_hz > 0.0 && baud_per_sc_hz.is_finite()) {
            return Err(param_err!("baud rate must be positive"));
        }
        if !(0.0..=1.0).contains(&roll_off) {
            return Err(param_err!("roll-off must lie in [0, 1]"));
        }
        let spacing = baud_per_sc_hz * (1.0 + roll_off);
        let mid = (n_subcarriers as f64 - 1.0) / 2.0;
        let sc_center_freqs_hz = (0..n_subcarriers).map(|i| (i as f64 - mid) * spacing).collect();
        let plan = DscmPlan {
            n_subcarriers,
            baud_per_sc_hz,
            roll_off,
            sc_center_freqs_hz,
            aggregate_sample_rate_hz,
        };
        if aggregate_sample_rate_hz < plan.total_bandwidth_hz() {
            return Err(Error::Configuration(alloc::format!(
                "aggregate rate {aggregate_sample_rate_hz} Hz below occupied bandwidth {} Hz",
                plan.total_bandwidth_hz()
            )));
        }
        plan.upsample_factor()?;
        Ok(plan)
    }

    /// The four 64 GBaud-aggregate 16QAM configurations: 8x8, 4x16, 2x32
    /// and 1x64 GBaud, at roll-off 0.1 and 128 GSa/s.
    pub fn reference_configs() -> Vec<DscmPlan> {
        [(8usize, 8e9), (4, 16e9), (2, 32e9), (1, 64e9)]
            .iter()
            .map(|&(n, baud)| {
                DscmPlan::new(n, baud, 0.1, Self::DEFAULT_AGGREGATE_RATE_HZ).expect("reference configuration is valid")
            })
            .collect()
    }

    pub fn spacing_hz(&self) -> f64 {
        self.baud_per_sc_hz * (1.0 + self.roll_off)
    }

    pub fn total_bandwidth_hz(&self) -> f64 {
        self.n_subcarriers as f64 * self.spacing_hz()
    }

    /// Integer ratio between the aggregate rate and the 2 samples/symbol
    /// subcarrier rate.
    pub fn upsample_factor(&self) -> Result<usize> {
        integer_ratio(self.aggregate_sample_rate_hz, 2.0 * self.baud_per_sc_hz)
    }

    /// Subcarrier with the largest |center frequency| (highest index on ties).
    pub fn outermost_subcarrier(&self) -> usize {
        let mut best = 0;
        for (i, f) in self.sc_center_freqs_hz.iter().enumerate() {
            if libm::fabs(*f) >= libm::fabs(self.sc_center_freqs_hz[best]) {
                best = i;
            }
        }
        best
    }
}

pub(crate) fn integer_ratio(num: f64, den: f64) -> Result<usize> {
    let r = num / den;
    let rounded = libm::round(r);
    if rounded < 1.0 || libm::fabs(r - rounded) > 1e-9 * rounded {
        return Err(Error::Configuration(alloc::format!(
            "rate ratio {num}/{den} = {r} is not a positive integer"
        )));
    }
    Ok(rounded as usize)
}

/// One subcarrier time slot destined for an ONU at a given distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub subcarrier: usize,
    pub duration_symbols: usize,
    pub target_onu_distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotSchedule {
    pub slots: Vec<Slot>,
}

/// Where a slot ended up in the generated stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotMeta {
    pub subcarrier: usize,
    pub start_symbol: usize,
    pub end_symbol: usize,
    /// Aggregate-rate sample range. Slots on one subcarrier partition
    /// `0..waveform.len()`.
    pub start_sample: usize,
    pub end_sample: usize,
    pub target_onu_distance_km: f64,
}

impl SlotMeta {
    /// Dispersion left after propagation over `observer_km` when the slot was
    /// pre-compensated for its own target distance.
    pub fn residual_km(&self, observer_km: f64) -> f64 {
        observer_km - self.target_onu_distance_km
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<C64>,
    pub bits: Vec<u8>,
}

/// Uniform i.i.d. bits; `n_bits` must be a multiple of 4.
pub fn prbs_bits(rng: &mut Rng, n_bits: usize) -> Result<Vec<u8>> {
    if !n_bits.is_multiple_of(4) {
        return Err(param_err!("bit count {n_bits} is not a multiple of 4"));
    }
    Ok((0..n_bits).map(|_| rng.bit()).collect())
}

const QAM_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

fn gray_level(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

/// Gray-coded square 16QAM, unit average power. Bits 0-1 of each nibble
/// select the I level, bits 2-3 the Q level.
pub fn map_16qam(bits: &[u8]) -> Result<SymbolFrame> {
    if !bits.len().is_multiple_of(4) {
        return Err(param_err!("bit count {} is not a multiple of 4", bits.len()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(param_err!("bits must be 0 or 1"));
    }
    let symbols = bits
        .chunks_exact(4)
        .map(|c| C64::new(gray_level(c[0], c[1]), gray_level(c[2], c[3])) * QAM_SCALE)
        .collect();
    Ok(SymbolFrame {
        symbols,
        bits: bits.to_vec(),
    })
}

/// Zero-stuffs to `sps` samples per symbol and convolves with the RRC taps.
/// Output has `n_symbols * sps + taps - 1` samples at `baud_hz * sps`.
pub fn shape_and_upsample(frame: &SymbolFrame, filt: &RrcFilter, sps: usize, baud_hz: f64) -> Result<ComplexWaveform> {
    if filt.sps() != sps {
        return Err(param_err!("filter designed for {} sps, asked for {sps}", filt.sps()));
    }
    let taps = filt.taps();
    let n_out = if frame.symbols.is_empty() {
        0
    } else {
        frame.symbols.len() * sps + taps.len() - 1
    };
    let mut out = vec![C64::new(0.0, 0.0); n_out];
    for (i, s) in frame.symbols.iter().enumerate() {
        let base = i * sps;
        for (j, t) in taps.iter().enumerate() {
            out[base + j] += *s * *t;
        }
    }
    ComplexWaveform::new(out, baud_hz * sps as f64)
}

/// Band-limited integer-factor interpolation via spectral zero padding.
fn upsample_spectral(x: &ComplexWaveform, factor: usize) -> Result<ComplexWaveform> {
    if factor == 1 {
        return Ok(x.clone());
    }
    let n = x.len();
    let m = n * factor;
    let mut spec = x.samples().to_vec();
    Fft::new(n).forward(&mut spec);
    let mut wide = vec![C64::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..n {
        if k < half || (k == half && n % 2 == 1) {
            wide[k] = spec[k];
        } else if k == half {
            // split the Nyquist bin between +fs/2 and -fs/2
            wide[k] = spec[k] * 0.5;
            wide[m - n + k] = spec[k] * 0.5;
        } else {
            wide[m - n + k] = spec[k];
        }
    }
    Fft::new(m).inverse(&mut wide);
    let scale = factor as f64;
    for v in &mut wide {
        *v *= scale;
    }
    ComplexWaveform::new(wide, x.sample_rate_hz() * factor as f64)
}

/// Upsamples every subcarrier to the aggregate rate, shifts it to its
/// center and sums.
pub fn dscm_mux(sc_waveforms: &[ComplexWaveform], plan: &DscmPlan) -> Result<ComplexWaveform> {
    if sc_waveforms.len() != plan.n_subcarriers {
        return Err(param_err!(
            "{} subcarrier waveforms for a {}-subcarrier plan",
            sc_waveforms.len(),
            plan.n_subcarriers
        ));
    }
    let len = sc_waveforms[0].len();
    if sc_waveforms.iter().any(|w| w.len() != len) {
        return Err(param_err!("subcarrier waveforms differ in length"));
    }
    let mut sum: Option<Vec<C64>> = None;
    for (w, &fc) in sc_waveforms.iter().zip(&plan.sc_center_freqs_hz) {
        let factor = integer_ratio(plan.aggregate_sample_rate_hz, w.sample_rate_hz())?;
        let up = upsample_spectral(w, factor)?;
        let shifted = freq_shift(&up, fc)?;
        match sum.as_mut() {
            None => sum = Some(shifted.into_samples()),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(shifted.samples()) {
                    *a += *b;
                }
            }
        }
    }
    ComplexWaveform::new(sum.unwrap_or_default(), plan.aggregate_sample_rate_hz)
}

/// Inverse dispersion all-pass for `distance_km` of `fiber`, 0 Hz centered.
pub fn cd_precompensate(x: &ComplexWaveform, fiber: &FiberSpec, distance_km: f64) -> Result<ComplexWaveform> {
    cd_precompensate_at(x, fiber, distance_km, 0.0)
}

/// As [`cd_precompensate`] for a subcarrier whose baseband 0 Hz sits at
/// `center_hz` from the optical carrier.
pub fn cd_precompensate_at(
    x: &ComplexWaveform,
    fiber: &FiberSpec,
    distance_km: f64,
    center_hz: f64,
) -> Result<ComplexWaveform> {
    if !(distance_km >= 0.0) {
        return Err(param_err!("pre-compensation distance must be >= 0, got {distance_km}"));
    }
    cd_all_pass(x, &fiber.with_length(distance_km), center_hz, 1.0)
}

/// A generated downstream signal with its ground-truth payload.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub waveform: ComplexWaveform,
    /// Transmitted symbols of every subcarrier, in time order. Symbol `i`
    /// peaks at 2-sps index `2 * (i + span / 2)` after matched filtering.
    pub sc_symbols: Vec<Vec<C64>>,
    pub span_symbols: usize,
}

fn sc_filter(plan: &DscmPlan, span: usize) -> Result<RrcFilter> {
    RrcFilter::design(plan.roll_off, 2, span)
}

/// Continuous stream: independent PRBS payload (`rng.fork(sc)`) on every
/// subcarrier, no pre-compensation.
pub fn build_stream(plan: &DscmPlan, n_symbols: usize, rng: &Rng, span: usize) -> Result<Transmission> {
    let filt = sc_filter(plan, span)?;
    let mut waves = Vec::with_capacity(plan.n_subcarriers);
    let mut sc_symbols = Vec::with_capacity(plan.n_subcarriers);
    for sc in 0..plan.n_subcarriers {
        let bits = prbs_bits(&mut rng.fork(sc as u64), 4 * n_symbols)?;
        let frame = map_16qam(&bits)?;
        waves.push(shape_and_upsample(&frame, &filt, 2, plan.baud_per_sc_hz)?);
        sc_symbols.push(frame.symbols);
    }
    Ok(Transmission {
        waveform: dscm_mux(&waves, plan)?,
        sc_symbols,
        span_symbols: span,
    })
}

/// TFDMA stream: each slot carries its own payload (`rng.fork(slot index)`)
/// and is pre-compensated for its target ONU before the subcarriers are
/// multiplexed. Slots on one subcarrier follow each other in schedule order;
/// shorter subcarrier timelines are padded with idle (zero) symbols.
pub fn build_slotted_stream(
    schedule: &SlotSchedule,
    plan: &DscmPlan,
    fiber: &FiberSpec,
    rng: &Rng,
    span: usize,
) -> Result<(Transmission, Vec<SlotMeta>)> {
    if schedule.slots.is_empty() {
        return Err(param_err!("slot schedule is empty"));
    }
    for (i, s) in schedule.slots.iter().enumerate() {
        if s.duration_symbols == 0 {
            return Err(param_err!("slot {i} has zero duration"));
        }
        if s.subcarrier >= plan.n_subcarriers {
            return Err(param_err!(
                "slot {i} uses subcarrier {} of {}",
                s.subcarrier,
                plan.n_subcarriers
            ));
        }
        if !(s.target_onu_distance_km >= 0.0) {
            return Err(param_err!("slot {i} has negative target distance"));
        }
    }
    let mut cursor = vec![0usize; plan.n_subcarriers];
    let mut starts = Vec::with_capacity(schedule.slots.len());
    for s in &schedule.slots {
        starts.push(cursor[s.subcarrier]);
        cursor[s.subcarrier] += s.duration_symbols;
    }
    let total = *cursor.iter().max().unwrap_or(&0);
    let filt = sc_filter(plan, span)?;
    let sc_rate = 2.0 * plan.baud_per_sc_hz;
    let sc_len = total * 2 + filt.taps().len() - 1;
    let mut sc_samples = vec![vec![C64::new(0.0, 0.0); sc_len]; plan.n_subcarriers];
    let mut sc_symbols = vec![vec![C64::new(0.0, 0.0); total]; plan.n_subcarriers];

    for (i, (slot, &start)) in schedule.slots.iter().zip(&starts).enumerate() {
        let bits = prbs_bits(&mut rng.fork(i as u64), 4 * slot.duration_symbols)?;
        let frame = map_16qam(&bits)?;
        let mut placed = vec![C64::new(0.0, 0.0); total];
        placed[start..start + slot.duration_symbols].copy_from_slice(&frame.symbols);
        sc_symbols[slot.subcarrier][start..start + slot.duration_symbols].copy_from_slice(&frame.symbols);
        let placed = SymbolFrame {
            symbols: placed,
            bits: Vec::new(),
        };
        let shaped = shape_and_upsample(&placed, &filt, 2, plan.baud_per_sc_hz)?;
        let pre = cd_precompensate_at(
            &shaped,
            fiber,
            slot.target_onu_distance_km,
            plan.sc_center_freqs_hz[slot.subcarrier],
        )?;
        for (a, b) in sc_samples[slot.subcarrier].iter_mut().zip(pre.samples()) {
            *a += *b;
        }
    }
    let waves = sc_samples
        .into_iter()
        .map(|s| ComplexWaveform::new(s, sc_rate))
        .collect::<Result<Vec<_>>>()?;
    let waveform = dscm_mux(&waves, plan)?;

    let sps_agg = integer_ratio(plan.aggregate_sample_rate_hz, plan.baud_per_sc_hz)?;
    let mut metas: Vec<SlotMeta> = schedule
        .slots
        .iter()
        .zip(&starts)
        .map(|(s, &start)| SlotMeta {
            subcarrier: s.subcarrier,
            start_symbol: start,
            end_symbol: start + s.duration_symbols,
            start_sample: start * sps_agg,
            end_sample: (start + s.duration_symbols) * sps_agg,
            target_onu_distance_km: s.target_onu_distance_km,
        })
        .collect();
    // last slot of each subcarrier absorbs the filter tail and idle padding
    for sc in 0..plan.n_subcarriers {
        if let Some(last) = metas.iter_mut().filter(|m| m.subcarrier == sc).last() {
            last.end_sample = waveform.len();
        }
    }
    Ok((
        Transmission {
            waveform,
            sc_symbols,
            span_symbols: span,
        },
        metas,
    ))
}
