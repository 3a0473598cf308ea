//! Expands a configuration into runs and executes them in parallel. Results
//! come back in configuration order regardless of scheduling.

use pon_timing_core::metrics::{complexity_report, ComplexityReport};
use pon_timing_core::rxdsp::RecoveryMode;
use pon_timing_core::scenario::{describe_failure, LinkScenario, PhaseProfile, RunReport, SlotScenario};
use pon_timing_core::txchain::DscmPlan;
use rayon::prelude::*;

use crate::config::{Preset, SimConfig};

/// One (configuration, distance, mode) result.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub config_index: usize,
    pub plan: DscmPlan,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: SimConfig,
    pub hash: String,
    pub rows: Vec<RunRow>,
    /// Runs that aborted, with the reason; they have no row.
    pub faults: Vec<String>,
    pub complexity: ComplexityReport,
}

impl Outcome {
    pub fn find(&self, config_index: usize, distance_km: f64, mode: RecoveryMode) -> Option<&RunReport> {
        self.rows
            .iter()
            .find(|r| r.config_index == config_index && r.report.distance_km == distance_km && r.report.mode == mode)
            .map(|r| &r.report)
    }
}

pub fn link_scenario(cfg: &SimConfig, plan: &DscmPlan) -> LinkScenario {
    let mut loop_template = cfg.loop_template();
    loop_template.roll_off = plan.roll_off;
    LinkScenario {
        plan: plan.clone(),
        probe_subcarrier: cfg.probe_subcarrier,
        fiber: cfg.fiber_spec(),
        n_symbols: cfg.n_symbols,
        span_symbols: cfg.span_symbols,
        snr_db: cfg.snr_db,
        phase: PhaseProfile {
            initial_offset_symbols: cfg.timing.initial_offset_symbols,
            step_offset_symbols: cfg.timing.step_offset_symbols,
            step_at_symbol: cfg.timing.step_at_symbol,
            drift_ppm: cfg.timing.drift_ppm,
        },
        loop_template,
        discard_blocks: cfg.discard_blocks,
        convergence_tol_symbols: cfg.convergence_tol_symbols,
        seed: cfg.seed,
    }
}

pub fn slot_scenario(cfg: &SimConfig, plan: &DscmPlan) -> SlotScenario {
    let mut loop_template = cfg.loop_template();
    loop_template.roll_off = plan.roll_off;
    let s = &cfg.slots;
    SlotScenario {
        plan: plan.clone(),
        subcarrier: s.subcarrier.unwrap_or_else(|| plan.outermost_subcarrier()),
        fiber: cfg.fiber_spec(),
        probe_distance_km: s.probe_distance_km,
        foreign_distance_km: s.foreign_distance_km,
        own_slot_symbols: s.own_slot_symbols,
        foreign_slot_symbols: s.foreign_slot_symbols,
        span_symbols: cfg.span_symbols,
        snr_db: cfg.snr_db,
        initial_offset_symbols: cfg.timing.initial_offset_symbols,
        loop_template,
        discard_blocks: cfg.discard_blocks,
        convergence_tol_symbols: cfg.convergence_tol_symbols,
        seed: cfg.seed,
    }
}

type Batch = (Vec<RunRow>, Vec<String>);

fn run_link(cfg: &SimConfig, index: usize, plan: &DscmPlan) -> Batch {
    let scenario = link_scenario(cfg, plan);
    let label = |d: f64| format!("{}x{} GBd, {d} km", plan.n_subcarriers, plan.baud_per_sc_hz / 1e9);
    let tx = match scenario.transmit() {
        Ok(tx) => tx,
        Err(e) => {
            return (
                Vec::new(),
                vec![format!("{}x{} GBd: {e}", plan.n_subcarriers, plan.baud_per_sc_hz / 1e9)],
            )
        }
    };
    let per_distance: Vec<Batch> = cfg
        .distances_km
        .par_iter()
        .enumerate()
        .map(|(di, &d)| {
            let received = scenario.receive(&tx, d, di as u64);
            let (x, truth) = match received {
                Ok(r) => r,
                Err(e) => return (Vec::new(), vec![format!("{}: {e}", label(d))]),
            };
            let mut rows = Vec::new();
            let mut faults = Vec::new();
            for &mode in &cfg.modes {
                match scenario.evaluate(&tx, &x, &truth, d, mode) {
                    Ok(report) => rows.push(RunRow {
                        config_index: index,
                        plan: plan.clone(),
                        report,
                    }),
                    Err(e) => faults.push(format!(
                        "{}x{} GBd, {}",
                        plan.n_subcarriers,
                        plan.baud_per_sc_hz / 1e9,
                        describe_failure(d, mode, &e)
                    )),
                }
            }
            (rows, faults)
        })
        .collect();
    flatten(per_distance)
}

fn run_slots(cfg: &SimConfig, index: usize, plan: &DscmPlan) -> Batch {
    let scenario = slot_scenario(cfg, plan);
    let tag = format!("{}x{} GBd slots", plan.n_subcarriers, plan.baud_per_sc_hz / 1e9);
    let rx = match scenario.receive() {
        Ok(rx) => rx,
        Err(e) => return (Vec::new(), vec![format!("{tag}: {e}")]),
    };
    let results: Vec<Batch> = cfg
        .modes
        .par_iter()
        .map(|&mode| match scenario.evaluate(&rx, mode) {
            Ok(report) => (
                vec![RunRow {
                    config_index: index,
                    plan: plan.clone(),
                    report,
                }],
                Vec::new(),
            ),
            Err(e) => (
                Vec::new(),
                vec![format!(
                    "{tag}, {}",
                    describe_failure(scenario.probe_distance_km, mode, &e)
                )],
            ),
        })
        .collect();
    flatten(results)
}

fn flatten(batches: Vec<Batch>) -> Batch {
    let mut rows = Vec::new();
    let mut faults = Vec::new();
    for (r, f) in batches {
        rows.extend(r);
        faults.extend(f);
    }
    (rows, faults)
}

/// Runs every configuration of `cfg`. Faults are collected, not fatal.
pub fn run(cfg: &SimConfig) -> Outcome {
    let plans = cfg.plans();
    let batches: Vec<Batch> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| match cfg.preset {
            Preset::Slots => run_slots(cfg, i, plan),
            Preset::Fig2 | Preset::Fig3 | Preset::Custom => run_link(cfg, i, plan),
        })
        .collect();
    let (rows, faults) = flatten(batches);
    Outcome {
        config: cfg.clone(),
        hash: cfg.hash(),
        rows,
        faults,
        complexity: complexity_report(cfg.timing_loop.dft_size, cfg.timing_loop.k_points)
            .expect("loop parameters validated"),
    }
}
