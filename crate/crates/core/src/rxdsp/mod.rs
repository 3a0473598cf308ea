//! ONU-side receiver: subcarrier downconversion and the band-edge Godard
//! timing loop with in-loop dispersion compensation, plus the two baselines
//! (raw bins, and full block compensation before extraction).

mod bins;
mod downconvert;
mod farrow;
mod godard;
mod timing_loop;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use bins::{bandedge_bins, bin_frequencies, inloop_cd_comp, BandEdgeBins, BandEdgeDetector, OpCounts};
pub use downconvert::subcarrier_downconvert;
pub use farrow::farrow_interpolate;
pub use godard::{godard_ted, TedEstimate, RELIABILITY_THRESHOLD};
pub use timing_loop::{loop_step, LoopGains, TimingLoopState, LOCK_THRESHOLD_SYMBOLS, LOCK_WINDOW};

use crate::channel::FiberSpec;
use crate::error::{param_err, Error, Result};
use crate::sigcore::{ComplexWaveform, C64};

/// How the band-edge bins reach the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecoveryMode {
    /// K-bin sparse DFT with in-loop residual dispersion compensation.
    Proposed,
    /// K-bin sparse DFT, no compensation.
    NoComp,
    /// Whole-block compensation (N-point FFT, N multiplies, inverse FFT)
    /// before the band-edge bins are read.
    FullComp,
}

impl RecoveryMode {
    pub const ALL: [RecoveryMode; 3] = [RecoveryMode::Proposed, RecoveryMode::NoComp, RecoveryMode::FullComp];

    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryMode::Proposed => "proposed",
            RecoveryMode::NoComp => "no_comp",
            RecoveryMode::FullComp => "full_comp",
        }
    }
}

impl fmt::Display for RecoveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecoveryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RecoveryMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| param_err!("unknown mode {s:?} (expected proposed, no_comp or full_comp)"))
    }
}

/// Residual dispersion assumed by the loop from `from_sample` (2-sps index)
/// onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualChange {
    pub from_sample: usize,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingLoopConfig {
    pub dft_size: usize,
    pub k_points: usize,
    pub roll_off: f64,
    pub sps: usize,
    /// Residual dispersion known to the loop; negative length means
    /// over-compensation.
    pub residual_cd: FiberSpec,
    /// Optional piecewise-constant override of `residual_cd.length_km`
    /// (TFDMA slots). Must be sorted by `from_sample`.
    pub residual_schedule: Vec<ResidualChange>,
    pub sc_center_freq_hz: f64,
    pub mode: RecoveryMode,
    pub kp: f64,
    pub ki: f64,
    pub block_stride: usize,
    /// Read each band-edge group from a window shifted by its residual group
    /// delay (compensating modes only).
    pub align_group_delay: bool,
}

impl TimingLoopConfig {
    pub fn new(mode: RecoveryMode, residual_cd: FiberSpec, sc_center_freq_hz: f64) -> Self {
        TimingLoopConfig {
            dft_size: 128,
            k_points: 12,
            roll_off: 0.1,
            sps: 2,
            residual_cd,
            residual_schedule: Vec::new(),
            sc_center_freq_hz,
            mode,
            kp: 0.05,
            ki: 1e-3,
            block_stride: 128,
            align_group_delay: true,
        }
    }

    pub fn gains(&self) -> LoopGains {
        LoopGains {
            kp: self.kp,
            ki: self.ki,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dft_size.is_power_of_two() || self.dft_size < 8 {
            return Err(param_err!(
                "DFT size must be a power of two >= 8, got {}",
                self.dft_size
            ));
        }
        bandedge_bins(self.dft_size, self.k_points)?;
        if self.sps != 2 {
            return Err(param_err!(
                "the band-edge pairing needs 2 samples/symbol, got {}",
                self.sps
            ));
        }
        if !(self.kp > 0.0 && self.ki > 0.0 && self.kp.is_finite() && self.ki.is_finite()) {
            return Err(param_err!(
                "loop gains must be positive (kp={}, ki={})",
                self.kp,
                self.ki
            ));
        }
        if self.block_stride == 0 || !self.block_stride.is_multiple_of(self.sps) || self.block_stride > self.dft_size {
            return Err(param_err!(
                "block stride must be a positive multiple of sps no larger than N, got {}",
                self.block_stride
            ));
        }
        self.residual_cd.validate_coefficients()?;
        if self
            .residual_schedule
            .windows(2)
            .any(|w| w[0].from_sample > w[1].from_sample)
        {
            return Err(param_err!("residual schedule must be sorted"));
        }
        Ok(())
    }

    /// Residual fiber length in force at 2-sps index `sample`.
    pub fn residual_at(&self, sample: usize) -> f64 {
        self.residual_schedule
            .iter()
            .rev()
            .find(|c| c.from_sample <= sample)
            .map_or(self.residual_cd.length_km, |c| c.length_km)
    }
}

/// Per-block record of one loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Nominal (uncorrected) 2-sps index of the block start.
    pub nominal_sample: usize,
    pub raw_error_symbols: f64,
    /// Correction applied to this block, in symbols.
    pub est_phase_symbols: f64,
    pub true_phase_symbols: f64,
    /// Detector output was unreliable and the loop held.
    pub held: bool,
    /// Lock-detector state after this block's update.
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingTrace {
    pub entries: Vec<TraceEntry>,
}

impl TimingTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn raw_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.raw_error_symbols)
    }

    /// Entries from block `start` on.
    pub fn tail(&self, start: usize) -> TimingTrace {
        TimingTrace {
            entries: self.entries[start.min(self.entries.len())..].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryOutput {
    /// Interpolated samples, `block_stride` per processed block.
    pub recovered: ComplexWaveform,
    pub trace: TimingTrace,
    /// Multiplications actually spent over the whole run.
    pub ops: OpCounts,
    /// 2-sps index of the first recovered sample before correction.
    pub origin: usize,
}

struct Detectors {
    list: Vec<(f64, BandEdgeDetector)>,
}

impl Detectors {
    fn build(cfg: &TimingLoopConfig, mode: RecoveryMode, fs: f64) -> Result<Self> {
        let mut lengths: Vec<f64> = Vec::new();
        lengths.push(cfg.residual_cd.length_km);
        lengths.extend(cfg.residual_schedule.iter().map(|c| c.length_km));
        let mut list: Vec<(f64, BandEdgeDetector)> = Vec::new();
        for l in lengths {
            if list.iter().any(|(have, _)| *have == l) {
                continue;
            }
            let det = BandEdgeDetector::new(
                cfg.dft_size,
                cfg.k_points,
                mode,
                &cfg.residual_cd.with_length(l),
                cfg.sc_center_freq_hz,
                fs,
                cfg.align_group_delay,
            )?;
            list.push((l, det));
        }
        Ok(Detectors { list })
    }

    fn for_length(&self, l: f64) -> &BandEdgeDetector {
        &self.list.iter().find(|(have, _)| *have == l).expect("detector built").1
    }

    fn max_lookback(&self) -> i64 {
        self.list.iter().map(|(_, d)| -d.span().0).max().unwrap_or(0)
    }
}

fn block_origin(lookback: i64, sps: usize) -> usize {
    // start on the symbol grid, with room for the interpolator and for the
    // correction to wander below zero
    let raw = (lookback + 8 * sps as i64) as usize;
    raw.div_ceil(sps) * sps
}

/// Closed-loop timing recovery over a 2-sps waveform.
///
/// Each block is interpolated at the current correction, its band-edge bins
/// are extracted according to `cfg.mode`, and the Godard error drives the
/// PI loop. `true_phase` gives the ground-truth delay (symbols) per input
/// sample and must match `x` in length.
pub fn run_timing_recovery(x: &ComplexWaveform, cfg: &TimingLoopConfig, true_phase: &[f64]) -> Result<RecoveryOutput> {
    cfg.validate()?;
    if true_phase.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: true_phase.len(),
        });
    }
    let fs = x.sample_rate_hz();
    let detectors = Detectors::build(cfg, cfg.mode, fs)?;
    let n = cfg.dft_size;
    let origin = block_origin(detectors.max_lookback(), cfg.sps);
    let samples = x.samples();
    let len = samples.len() as i64;
    let half_k = (cfg.k_points / 2) as u64;

    let mut state = TimingLoopState::default();
    let mut entries = Vec::new();
    let mut recovered: Vec<C64> = Vec::new();
    let mut ops = OpCounts::default();
    let mut buf: Vec<C64> = Vec::new();

    for b in 0.. {
        let nominal = origin + b * cfg.block_stride;
        let det = detectors.for_length(cfg.residual_at(nominal + n / 2));
        let (lo, hi) = det.span();
        let start = nominal as i64 + state.basepoint;
        if start + lo < 1 || start + hi + 2 >= len {
            break;
        }
        buf.clear();
        for j in lo..hi {
            buf.push(farrow_interpolate(samples, start + j, state.mu)?);
        }
        let (upper, lower) = det.extract(&buf, &mut ops);
        ops.correlation += half_k;
        let ted = godard_ted(&upper, &lower);
        let est = state.phase_symbols(cfg.sps);
        let keep = (-lo) as usize;
        recovered.extend_from_slice(&buf[keep..keep + cfg.block_stride]);
        state = if ted.reliable {
            loop_step(state, ted.error_symbols, cfg.gains(), cfg.sps)?
        } else {
            state.hold()
        };
        entries.push(TraceEntry {
            nominal_sample: nominal,
            raw_error_symbols: ted.error_symbols,
            est_phase_symbols: est,
            true_phase_symbols: true_phase[(nominal + n / 2).min(true_phase.len() - 1)],
            held: !ted.reliable,
            locked: state.locked,
        });
    }
    if entries.is_empty() {
        return Err(param_err!("waveform of {} samples is too short for one block", x.len()));
    }
    Ok(RecoveryOutput {
        recovered: ComplexWaveform::new(recovered, fs)?,
        trace: TimingTrace { entries },
        ops,
        origin,
    })
}

/// Feed-forward variant: every block is evaluated on the raw samples at its
/// nominal position, without interpolation or feedback.
pub fn estimate_open_loop(x: &ComplexWaveform, cfg: &TimingLoopConfig) -> Result<Vec<TedEstimate>> {
    cfg.validate()?;
    let detectors = Detectors::build(cfg, cfg.mode, x.sample_rate_hz())?;
    let n = cfg.dft_size;
    let origin = block_origin(detectors.max_lookback(), cfg.sps);
    let samples = x.samples();
    let mut out = Vec::new();
    let mut ops = OpCounts::default();
    for b in 0.. {
        let nominal = origin + b * cfg.block_stride;
        let det = detectors.for_length(cfg.residual_at(nominal + n / 2));
        let (lo, hi) = det.span();
        if nominal as i64 + hi > samples.len() as i64 {
            break;
        }
        let from = (nominal as i64 + lo) as usize;
        let to = (nominal as i64 + hi) as usize;
        let (upper, lower) = det.extract(&samples[from..to], &mut ops);
        out.push(godard_ted(&upper, &lower));
    }
    Ok(out)
}
