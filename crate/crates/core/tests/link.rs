//! End-to-end properties of the transmit / fiber / receive chain.

use pon_timing_core::channel::{apply_cd, FiberSpec};
use pon_timing_core::metrics::{evm, wrap_symbols};
use pon_timing_core::rxdsp::{
    estimate_open_loop, run_timing_recovery, subcarrier_downconvert, BandEdgeDetector, OpCounts, RecoveryMode,
    TimingLoopConfig,
};
use pon_timing_core::scenario::{LinkScenario, PhaseProfile, SlotScenario};
use pon_timing_core::sigcore::{ideal_fractional_delay, ComplexWaveform, Rng};
use pon_timing_core::txchain::{build_stream, DscmPlan, Transmission, DEFAULT_SPAN_SYMBOLS};

const SPAN: usize = DEFAULT_SPAN_SYMBOLS;

fn plan(i: usize) -> DscmPlan {
    DscmPlan::reference_configs()[i].clone()
}

fn single_sc(n_symbols: usize, seed: u64) -> (DscmPlan, Transmission, ComplexWaveform) {
    let p = plan(3);
    let tx = build_stream(&p, n_symbols, &Rng::new(seed), SPAN).unwrap();
    let rx = subcarrier_downconvert(&tx.waveform, &p, 0, SPAN).unwrap();
    (p, tx, rx)
}

fn symbol_samples(rx: &ComplexWaveform, n: usize) -> Vec<pon_timing_core::C64> {
    (0..n).map(|s| rx.samples()[2 * (s + SPAN / 2)]).collect()
}

#[test]
fn loopback_evm_every_config() {
    for (i, p) in DscmPlan::reference_configs().iter().enumerate() {
        let tx = build_stream(p, 4096, &Rng::new(11), SPAN).unwrap();
        for sc in [0, p.n_subcarriers - 1] {
            let rx = subcarrier_downconvert(&tx.waveform, p, sc, SPAN).unwrap();
            let got = symbol_samples(&rx, 4096);
            let e = evm(&got[64..4032], &tx.sc_symbols[sc][64..4032]).unwrap();
            assert!(e <= -35.0, "config {i} sc {sc}: {e} dB");
        }
    }
}

#[test]
fn fiber_and_static_compensation_round_trip() {
    let p = plan(2);
    let tx = build_stream(&p, 4096, &Rng::new(12), SPAN).unwrap();
    let fiber = FiberSpec::standard(320.0).unwrap();
    let line = apply_cd(&tx.waveform, &fiber).unwrap();
    let back = pon_timing_core::txchain::cd_precompensate(&line, &fiber, 320.0).unwrap();
    let rx = subcarrier_downconvert(&back, &p, 1, SPAN).unwrap();
    let got = symbol_samples(&rx, 4096);
    assert!(evm(&got[256..3840], &tx.sc_symbols[1][256..3840]).unwrap() <= -35.0);
}

fn open_loop_mean(rx: &ComplexWaveform, delay_samples: f64) -> f64 {
    let x = ideal_fractional_delay(rx, delay_samples).unwrap();
    let cfg = TimingLoopConfig::new(RecoveryMode::NoComp, FiberSpec::standard(0.0).unwrap(), 0.0);
    let est = estimate_open_loop(&x, &cfg).unwrap();
    let inner = &est[4..est.len() - 4];
    inner.iter().map(|e| e.error_symbols).sum::<f64>() / inner.len() as f64
}

#[test]
fn open_loop_estimate_is_linear_in_delay() {
    let (_, _, rx) = single_sc(1 << 14, 13);
    let grid: Vec<f64> = (-4..=4).map(|i| 0.1 * i as f64).collect();
    let means: Vec<f64> = grid.iter().map(|&d| open_loop_mean(&rx, d)).collect();
    for (d, m) in grid.iter().zip(&means) {
        assert!((m - d / 2.0).abs() <= 0.02, "d = {d}: {m}");
    }
    let xs: Vec<f64> = grid.iter().map(|d| d / 2.0).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, means.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    assert!((slope - 1.0).abs() <= 0.05, "slope {slope}");
    assert!((my - slope * mx).abs() <= 0.01);
}

#[test]
fn unimpaired_loop_stays_put() {
    let (_, _, rx) = single_sc(1 << 15, 14);
    for mode in RecoveryMode::ALL {
        let cfg = TimingLoopConfig::new(mode, FiberSpec::standard(0.0).unwrap(), 0.0);
        let truth = vec![0.0; rx.len()];
        let out = run_timing_recovery(&rx, &cfg, &truth).unwrap();
        let worst = out.trace.entries[20..]
            .iter()
            .map(|e| wrap_symbols(e.est_phase_symbols).abs())
            .fold(0.0, f64::max);
        let n = out.trace.entries.len() - 20;
        let rms = (out.trace.entries[20..]
            .iter()
            .map(|e| wrap_symbols(e.est_phase_symbols).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        // pattern self-noise leaves about 0.014 symbols of loop jitter plus a
        // 0.01 symbol detector bias, so the bound is looser than a noiseless
        // loop would allow
        assert!(rms <= 0.03, "{mode}: rms {rms}");
        assert!(worst <= 0.08, "{mode}: worst {worst}");
    }
}

#[test]
fn proposed_bins_match_full_compensation_at_64g_320km() {
    let p = plan(3);
    let tx = build_stream(&p, 1 << 13, &Rng::new(15), SPAN).unwrap();
    let fiber = FiberSpec::standard(320.0).unwrap();
    let rx = subcarrier_downconvert(&apply_cd(&tx.waveform, &fiber).unwrap(), &p, 0, SPAN).unwrap();
    let fs = rx.sample_rate_hz();
    let det = BandEdgeDetector::new(128, 12, RecoveryMode::Proposed, &fiber, 0.0, fs, true).unwrap();
    let full = BandEdgeDetector::new(128, 12, RecoveryMode::FullComp, &fiber, 0.0, fs, true).unwrap();
    assert_eq!(det.span(), full.span());
    let (lo, hi) = det.span();
    let mut ops = OpCounts::default();
    let mut checked = 0;
    let mut start = -lo as usize;
    while start as i64 + hi <= rx.len() as i64 {
        let buf = &rx.samples()[(start as i64 + lo) as usize..(start as i64 + hi) as usize];
        let (pu, pl) = det.extract(buf, &mut ops);
        let (fu, fl) = full.extract(buf, &mut ops);
        let scale = fu.iter().chain(&fl).map(|v| v.norm()).fold(0.0, f64::max);
        let diff = pu
            .iter()
            .chain(&pl)
            .zip(fu.iter().chain(&fl))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-6 * scale, "block at {start}: {diff} vs {scale}");
        checked += 1;
        start += 128;
    }
    assert!(checked > 50);
}

fn step_scenario(kp: f64, step: f64) -> LinkScenario {
    let fiber = FiberSpec::standard(0.0).unwrap();
    let mut lp = TimingLoopConfig::new(RecoveryMode::Proposed, fiber, 0.0);
    lp.kp = kp;
    LinkScenario {
        plan: plan(3),
        probe_subcarrier: None,
        fiber,
        n_symbols: 1 << 15,
        span_symbols: SPAN,
        snr_db: None,
        phase: PhaseProfile {
            step_offset_symbols: step,
            step_at_symbol: Some(1 << 13),
            ..PhaseProfile::default()
        },
        loop_template: lp,
        discard_blocks: 100,
        convergence_tol_symbols: 0.05,
        seed: 16,
    }
}

#[test]
fn step_response_faster_with_larger_kp() {
    let mut conv = Vec::new();
    for kp in [0.02, 0.05, 0.1] {
        let sc = step_scenario(kp, 0.1);
        let tx = sc.transmit().unwrap();
        let r = sc
            .run_distance(&tx, 0.0, 0, &[RecoveryMode::Proposed])
            .unwrap()
            .remove(0);
        conv.push(r.convergence_blocks.expect("converges"));
    }
    eprintln!("{conv:?}");
    assert!(conv.windows(2).all(|w| w[1] <= w[0]), "{conv:?}");
}

#[test]
fn runs_are_deterministic() {
    let sc = step_scenario(0.05, 0.25);
    let a = sc
        .run_distance(&sc.transmit().unwrap(), 80.0, 3, &RecoveryMode::ALL)
        .unwrap();
    let b = sc
        .run_distance(&sc.transmit().unwrap(), 80.0, 3, &RecoveryMode::ALL)
        .unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trace.entries, y.trace.entries);
        assert_eq!(x.evm_db, y.evm_db);
    }
}

#[test]
fn slot_reception_schedules_foreign_residual() {
    let fiber = FiberSpec::standard(0.0).unwrap();
    let sc = SlotScenario {
        plan: plan(3),
        subcarrier: 0,
        fiber,
        probe_distance_km: 280.0,
        foreign_distance_km: 40.0,
        own_slot_symbols: 4096,
        foreign_slot_symbols: 2048,
        span_symbols: SPAN,
        snr_db: None,
        initial_offset_symbols: 0.0,
        loop_template: TimingLoopConfig::new(RecoveryMode::Proposed, fiber, 0.0),
        discard_blocks: 20,
        convergence_tol_symbols: 0.02,
        seed: 17,
    };
    let rx = sc.receive().unwrap();
    let lengths: Vec<f64> = rx.residual_schedule.iter().map(|c| c.length_km).collect();
    assert_eq!(lengths, vec![240.0, 0.0]);
    assert_eq!(rx.residual_schedule[0].from_sample, 2 * (4096 + SPAN / 2));
    assert_eq!(rx.reentry_sample, 2 * (4096 + 2048 + SPAN / 2));
    let proposed = sc.evaluate(&rx, RecoveryMode::Proposed).unwrap();
    assert!(proposed.convergence_blocks.is_some());
    assert!(proposed.evm_db.unwrap() < -25.0);
}
