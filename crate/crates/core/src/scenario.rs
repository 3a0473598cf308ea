//! End-to-end link runs: transmitter, fiber, subcarrier receiver and timing
//! recovery, reduced to per-mode metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::channel::{add_noise, apply_cd, cd_all_pass, inject_timing, FiberSpec, TimingImpairment};
use crate::error::{param_err, Result};
use crate::metrics::{convergence_time, evm, timing_error_variance, StageCounts};
use crate::rxdsp::{
    run_timing_recovery, subcarrier_downconvert, RecoveryMode, RecoveryOutput, ResidualChange, TimingLoopConfig,
    TimingTrace,
};
use crate::sigcore::{ideal_fractional_delay, ComplexWaveform, Rng, C64};
use crate::txchain::{build_slotted_stream, build_stream, DscmPlan, Slot, SlotSchedule, Transmission};

/// Receiver samples per symbol.
const SPS: usize = 2;
/// Noise streams are forked from a seed distinct from the payload streams.
const NOISE_SEED_SALT: u64 = 0x6e6f_6973_655f_7273;

/// Sampling-phase impairment in symbol units. `step_at_symbol` defaults to
/// mid-stream.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseProfile {
    pub initial_offset_symbols: f64,
    pub step_offset_symbols: f64,
    pub step_at_symbol: Option<usize>,
    pub drift_ppm: f64,
}

/// Everything a continuous-stream run needs except distance and mode.
#[derive(Debug, Clone)]
pub struct LinkScenario {
    pub plan: DscmPlan,
    /// `None` picks the outermost subcarrier, which sees the largest
    /// dispersion-induced skew.
    pub probe_subcarrier: Option<usize>,
    /// Dispersion and wavelength; the length is taken from each run.
    pub fiber: FiberSpec,
    pub n_symbols: usize,
    pub span_symbols: usize,
    pub snr_db: Option<f64>,
    pub phase: PhaseProfile,
    /// Mode, residual and subcarrier center are overwritten per run.
    pub loop_template: TimingLoopConfig,
    pub discard_blocks: usize,
    pub convergence_tol_symbols: f64,
    pub seed: u64,
}

/// Metrics of one (distance, mode) run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub distance_km: f64,
    pub mode: RecoveryMode,
    pub trace: TimingTrace,
    /// Block of the phase step or slot entry; metrics that track
    /// reacquisition start here.
    pub event_block: usize,
    pub variance_symbols_sq: Option<f64>,
    /// Blocks after `event_block` until `|est - true|` settles.
    pub convergence_blocks: Option<usize>,
    pub evm_db: Option<f64>,
    /// Measured multiplications per block.
    pub ops_per_block: StageCounts,
}

impl RunReport {
    fn from_recovery(
        out: &RecoveryOutput,
        distance_km: f64,
        mode: RecoveryMode,
        event_block: usize,
        discard_blocks: usize,
        tol: f64,
        evm_db: Option<f64>,
    ) -> Self {
        let trace = out.trace.clone();
        let after = trace.tail(event_block);
        let variance = timing_error_variance(&after, discard_blocks).ok();
        RunReport {
            distance_km,
            mode,
            event_block,
            variance_symbols_sq: variance,
            convergence_blocks: convergence_time(&after, tol),
            evm_db,
            ops_per_block: StageCounts::from_ops(&out.ops, trace.len()),
            trace,
        }
    }
}

/// Ground-truth phase of the signal entering the detector. Without in-loop
/// compensation the band-edge pair also carries the residual bulk group delay
/// of the subcarrier, `tau(fc)` in symbols; the compensating modes remove it.
pub fn detector_reference(cfg: &TimingLoopConfig, injected: &[f64], baud_hz: f64) -> Vec<f64> {
    if cfg.mode != RecoveryMode::NoComp {
        return injected.to_vec();
    }
    let mut cached = (f64::NAN, 0.0);
    injected
        .iter()
        .enumerate()
        .map(|(n, d)| {
            let l = cfg.residual_at(n);
            if l != cached.0 {
                cached = (
                    l,
                    cfg.residual_cd.with_length(l).group_delay_s(cfg.sc_center_freq_hz) * baud_hz,
                );
            }
            d + cached.1
        })
        .collect()
}

/// Samples at `rate` covered by the dispersion of `fiber` over a subcarrier
/// at `center` with `bandwidth`: both edge group delays plus the filter span.
fn cd_guard(fiber: &FiberSpec, center: f64, bandwidth: f64, rate: f64, span: usize) -> usize {
    let lo = libm::fabs(fiber.group_delay_s(center - bandwidth / 2.0));
    let hi = libm::fabs(fiber.group_delay_s(center + bandwidth / 2.0));
    libm::ceil((lo + hi) * rate) as usize + SPS * span
}

impl LinkScenario {
    pub fn probe(&self) -> Result<usize> {
        let sc = self
            .probe_subcarrier
            .unwrap_or_else(|| self.plan.outermost_subcarrier());
        if sc >= self.plan.n_subcarriers {
            return Err(param_err!("probe subcarrier {sc} of {}", self.plan.n_subcarriers));
        }
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.probe()?;
        self.fiber.validate_coefficients()?;
        self.loop_template.validate()?;
        if self.n_symbols < 1024 {
            return Err(param_err!("n_symbols must be at least 1024, got {}", self.n_symbols));
        }
        if !(self.convergence_tol_symbols > 0.0) {
            return Err(param_err!("convergence tolerance must be positive"));
        }
        if let Some(at) = self.phase.step_at_symbol {
            if at >= self.n_symbols {
                return Err(param_err!("step at symbol {at} beyond {} symbols", self.n_symbols));
            }
        }
        Ok(())
    }

    fn step_symbol(&self) -> usize {
        self.phase.step_at_symbol.unwrap_or(self.n_symbols / 2)
    }

    pub fn transmit(&self) -> Result<Transmission> {
        self.validate()?;
        build_stream(&self.plan, self.n_symbols, &Rng::new(self.seed), self.span_symbols)
    }

    /// Received 2-sps probe subcarrier after `distance_km` of fiber, noise
    /// and the sampling-phase impairment, trimmed of the dispersion guard at
    /// the tail. Returns the waveform and the true delay per sample.
    pub fn receive(&self, tx: &Transmission, distance_km: f64, run_index: u64) -> Result<(ComplexWaveform, Vec<f64>)> {
        let fiber = FiberSpec::new(self.fiber.dispersion_ps_nm_km, self.fiber.wavelength_nm, distance_km)?;
        let line = apply_cd(&tx.waveform, &fiber)?;
        let mut noise_rng = Rng::new(self.seed ^ NOISE_SEED_SALT).fork(run_index);
        let line = add_noise(&line, self.snr_db, &mut noise_rng)?;
        let probe = self.probe()?;
        let sc = subcarrier_downconvert(&line, &self.plan, probe, self.span_symbols)?;
        let imp = TimingImpairment {
            initial_offset_symbols: self.phase.initial_offset_symbols,
            step_offset_symbols: self.phase.step_offset_symbols,
            step_at_sample: SPS * (self.step_symbol() + self.span_symbols / 2),
            drift_ppm: self.phase.drift_ppm,
        };
        let (x, truth) = inject_timing(&sc, &imp, SPS)?;
        let guard = self.guard(distance_km)?;
        if guard * 4 >= x.len() {
            return Err(param_err!(
                "stream of {} samples too short for a {guard}-sample guard",
                x.len()
            ));
        }
        let keep = x.len() - guard;
        let fs = x.sample_rate_hz();
        let mut samples = x.into_samples();
        samples.truncate(keep);
        Ok((ComplexWaveform::new(samples, fs)?, truth[..keep].to_vec()))
    }

    fn guard(&self, distance_km: f64) -> Result<usize> {
        let probe = self.probe()?;
        let bw = self.plan.baud_per_sc_hz * (1.0 + self.plan.roll_off);
        Ok(cd_guard(
            &self.fiber.with_length(distance_km),
            self.plan.sc_center_freqs_hz[probe],
            bw,
            SPS as f64 * self.plan.baud_per_sc_hz,
            self.span_symbols,
        ))
    }

    pub fn loop_config(&self, mode: RecoveryMode, distance_km: f64) -> Result<TimingLoopConfig> {
        let mut cfg = self.loop_template.clone();
        cfg.mode = mode;
        cfg.residual_cd = self.fiber.with_length(distance_km);
        cfg.residual_schedule.clear();
        cfg.sc_center_freq_hz = self.plan.sc_center_freqs_hz[self.probe()?];
        Ok(cfg)
    }

    /// Timing recovery and metrics for one mode on an already received
    /// waveform. The residual dispersion equals the line length (no
    /// transmitter pre-compensation).
    pub fn evaluate(
        &self,
        tx: &Transmission,
        x: &ComplexWaveform,
        truth: &[f64],
        distance_km: f64,
        mode: RecoveryMode,
    ) -> Result<RunReport> {
        let cfg = self.loop_config(mode, distance_km)?;
        let reference = detector_reference(&cfg, truth, self.plan.baud_per_sc_hz);
        let out = run_timing_recovery(x, &cfg, &reference)?;
        let event_block = if self.phase.step_offset_symbols != 0.0 {
            let step_sample = SPS * (self.step_symbol() + self.span_symbols / 2);
            out.trace
                .entries
                .iter()
                .position(|e| e.nominal_sample + cfg.dft_size / 2 >= step_sample)
                .unwrap_or(out.trace.len())
        } else {
            0
        };
        let guard = self.guard(distance_km)?;
        let evm_db = recovered_evm(
            &out,
            &tx.sc_symbols[self.probe()?],
            &cfg,
            self.span_symbols,
            self.discard_blocks,
            guard,
        );
        Ok(RunReport::from_recovery(
            &out,
            distance_km,
            mode,
            event_block,
            self.discard_blocks,
            self.convergence_tol_symbols,
            evm_db,
        ))
    }

    /// Every mode at one distance on a shared received waveform.
    pub fn run_distance(
        &self,
        tx: &Transmission,
        distance_km: f64,
        run_index: u64,
        modes: &[RecoveryMode],
    ) -> Result<Vec<RunReport>> {
        let (x, truth) = self.receive(tx, distance_km, run_index)?;
        modes
            .iter()
            .map(|&m| self.evaluate(tx, &x, &truth, distance_km, m))
            .collect()
    }
}

/// EVM of the recovered symbols after static compensation of the residual
/// dispersion, over blocks past the discard window and away from the tail.
/// Without in-loop compensation the loop tracks the bulk group delay, so the
/// static filter keeps it.
fn recovered_evm(
    out: &RecoveryOutput,
    symbols: &[C64],
    cfg: &TimingLoopConfig,
    span: usize,
    discard_blocks: usize,
    guard: usize,
) -> Option<f64> {
    let mut comp = cd_all_pass(&out.recovered, &cfg.residual_cd, cfg.sc_center_freq_hz, 1.0).ok()?;
    if cfg.mode == RecoveryMode::NoComp {
        let bulk = cfg.residual_cd.group_delay_s(cfg.sc_center_freq_hz) * comp.sample_rate_hz();
        comp = ideal_fractional_delay(&comp, bulk).ok()?;
    }
    let rec = comp.samples();
    let first = discard_blocks * cfg.block_stride;
    let last = rec.len().checked_sub(guard)?;
    let first_symbol = ((out.origin + first) / SPS).checked_sub(span / 2)?;
    let count = (last.checked_sub(first)? / SPS).min(symbols.len().checked_sub(first_symbol)?);
    if count < 256 {
        return None;
    }
    let got: Vec<C64> = (0..count).map(|s| rec[first + SPS * s]).collect();
    evm(&got, &symbols[first_symbol..first_symbol + count]).ok()
}

/// Two-ONU TFDMA run on one subcarrier: the probe ONU's slot, a foreign slot
/// pre-compensated for another distance, then the probe's slot again.
#[derive(Debug, Clone)]
pub struct SlotScenario {
    pub plan: DscmPlan,
    pub subcarrier: usize,
    pub fiber: FiberSpec,
    pub probe_distance_km: f64,
    pub foreign_distance_km: f64,
    pub own_slot_symbols: usize,
    pub foreign_slot_symbols: usize,
    pub span_symbols: usize,
    pub snr_db: Option<f64>,
    pub initial_offset_symbols: f64,
    pub loop_template: TimingLoopConfig,
    pub discard_blocks: usize,
    pub convergence_tol_symbols: f64,
    pub seed: u64,
}

/// Prepared slotted reception shared by all modes.
#[derive(Debug, Clone)]
pub struct SlotReception {
    pub waveform: ComplexWaveform,
    pub truth: Vec<f64>,
    /// Residual dispersion per slot as seen by the probe, on 2-sps indices.
    pub residual_schedule: Vec<ResidualChange>,
    /// 2-sps index where the probe's second slot begins.
    pub reentry_sample: usize,
    pub symbols: Vec<C64>,
}

impl SlotScenario {
    pub fn schedule(&self) -> SlotSchedule {
        let own = |n| Slot {
            subcarrier: self.subcarrier,
            duration_symbols: n,
            target_onu_distance_km: self.probe_distance_km,
        };
        SlotSchedule {
            slots: alloc::vec![
                own(self.own_slot_symbols),
                Slot {
                    subcarrier: self.subcarrier,
                    duration_symbols: self.foreign_slot_symbols,
                    target_onu_distance_km: self.foreign_distance_km,
                },
                own(self.own_slot_symbols),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarrier >= self.plan.n_subcarriers {
            return Err(param_err!(
                "subcarrier {} of {}",
                self.subcarrier,
                self.plan.n_subcarriers
            ));
        }
        if self.own_slot_symbols < 1024 || self.foreign_slot_symbols < 256 {
            return Err(param_err!("slots too short for timing statistics"));
        }
        if !(self.probe_distance_km >= 0.0 && self.foreign_distance_km >= 0.0) {
            return Err(param_err!("ONU distances must be non-negative"));
        }
        self.loop_template.validate()
    }

    pub fn receive(&self) -> Result<SlotReception> {
        self.validate()?;
        let fiber = self.fiber.with_length(self.probe_distance_km);
        let (tx, metas) = build_slotted_stream(
            &self.schedule(),
            &self.plan,
            &fiber,
            &Rng::new(self.seed),
            self.span_symbols,
        )?;
        let line = apply_cd(&tx.waveform, &fiber)?;
        let mut noise_rng = Rng::new(self.seed ^ NOISE_SEED_SALT);
        let line = add_noise(&line, self.snr_db, &mut noise_rng)?;
        let sc = subcarrier_downconvert(&line, &self.plan, self.subcarrier, self.span_symbols)?;
        let imp = TimingImpairment {
            initial_offset_symbols: self.initial_offset_symbols,
            ..TimingImpairment::default()
        };
        let (x, truth) = inject_timing(&sc, &imp, SPS)?;
        let to_rx = |symbol: usize| SPS * (symbol + self.span_symbols / 2);
        let residual_schedule = metas
            .iter()
            .skip(1)
            .map(|m| ResidualChange {
                from_sample: to_rx(m.start_symbol),
                length_km: m.residual_km(self.probe_distance_km),
            })
            .collect();
        Ok(SlotReception {
            waveform: x,
            truth,
            residual_schedule,
            reentry_sample: to_rx(metas[2].start_symbol),
            symbols: tx.sc_symbols[self.subcarrier].clone(),
        })
    }

    pub fn loop_config(&self, mode: RecoveryMode, rx: &SlotReception) -> TimingLoopConfig {
        let mut cfg = self.loop_template.clone();
        cfg.mode = mode;
        cfg.residual_cd = self.fiber.with_length(0.0);
        cfg.residual_schedule = rx.residual_schedule.clone();
        cfg.sc_center_freq_hz = self.plan.sc_center_freqs_hz[self.subcarrier];
        cfg
    }

    /// Reacquisition metrics from the probe's re-entry into its own slot.
    pub fn evaluate(&self, rx: &SlotReception, mode: RecoveryMode) -> Result<RunReport> {
        let cfg = self.loop_config(mode, rx);
        let reference = detector_reference(&cfg, &rx.truth, self.plan.baud_per_sc_hz);
        let out = run_timing_recovery(&rx.waveform, &cfg, &reference)?;
        let event_block = out
            .trace
            .entries
            .iter()
            .position(|e| e.nominal_sample >= rx.reentry_sample)
            .ok_or_else(|| param_err!("trace ends before the probe slot re-entry"))?;
        // symbols of the second own slot, past the discard window, are
        // compared against the payload without any compensation
        let first = event_block * cfg.block_stride + self.discard_blocks * cfg.block_stride;
        let evm_db = (|| {
            let rec = out.recovered.samples();
            let first_symbol = ((out.origin + first) / SPS).checked_sub(self.span_symbols / 2)?;
            let end = rx.symbols.len().min((out.origin + rec.len()) / SPS - self.span_symbols);
            let count = end.checked_sub(first_symbol)?;
            if count < 256 {
                return None;
            }
            let got: Vec<C64> = (0..count).map(|s| rec[first + SPS * s]).collect();
            evm(&got, &rx.symbols[first_symbol..first_symbol + count]).ok()
        })();
        Ok(RunReport::from_recovery(
            &out,
            self.probe_distance_km,
            mode,
            event_block,
            self.discard_blocks,
            self.convergence_tol_symbols,
            evm_db,
        ))
    }
}

/// Loop fault or short-trace description for reports.
pub fn describe_failure(distance_km: f64, mode: RecoveryMode, err: &crate::Error) -> String {
    format!("{distance_km} km / {}: {}", mode.as_str(), err)
}
