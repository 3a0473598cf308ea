//! Timing-error statistics, convergence, EVM and per-block complexity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param_err, Error, Result};
use crate::rxdsp::{OpCounts, RecoveryMode, TimingTrace, LOCK_WINDOW};
use crate::sigcore::{Fft, C64};

/// Blocks dropped from the start of a trace before statistics are taken.
pub const DEFAULT_DISCARD_BLOCKS: usize = 200;
/// Consecutive blocks `|est - true|` must stay within tolerance to count as
/// converged.
pub const CONVERGENCE_WINDOW: usize = LOCK_WINDOW;

/// Wraps a phase difference in symbols to `(-0.5, 0.5]`. The detector cannot
/// tell whole-symbol slips apart, so comparisons against ground truth use
/// this.
pub fn wrap_symbols(x: f64) -> f64 {
    let mut w = x - libm::round(x);
    if w <= -0.5 {
        w += 1.0;
    }
    w
}

/// Unbiased sample variance of the raw detector error after `discard_blocks`,
/// in symbols^2.
pub fn timing_error_variance(trace: &TimingTrace, discard_blocks: usize) -> Result<f64> {
    if trace.len() <= discard_blocks + 1 {
        return Err(param_err!(
            "trace of {} blocks too short to discard {discard_blocks}",
            trace.len()
        ));
    }
    let xs: Vec<f64> = trace.raw_errors().skip(discard_blocks).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(ss / (xs.len() - 1) as f64)
}

/// First block from which `|est - true|` (wrapped) stays below `tol_symbols`
/// for [`CONVERGENCE_WINDOW`] consecutive blocks.
pub fn convergence_time(trace: &TimingTrace, tol_symbols: f64) -> Option<usize> {
    let ok: Vec<bool> = trace
        .entries
        .iter()
        .map(|e| libm::fabs(wrap_symbols(e.est_phase_symbols - e.true_phase_symbols)) < tol_symbols)
        .collect();
    let mut run = 0usize;
    for (i, good) in ok.iter().enumerate() {
        run = if *good { run + 1 } else { 0 };
        if run == CONVERGENCE_WINDOW {
            return Some(i + 1 - CONVERGENCE_WINDOW);
        }
    }
    None
}

/// Error vector magnitude in dB after integer-lag alignment (peak of the
/// cross-correlation) and a least-squares complex gain on `recovered`.
/// Identical inputs give `-inf`.
pub fn evm(recovered: &[C64], reference: &[C64]) -> Result<f64> {
    if recovered.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: recovered.len(),
            right: reference.len(),
        });
    }
    if recovered.is_empty() {
        return Err(param_err!("EVM of empty sequences"));
    }
    let lag = best_lag(recovered, reference);
    let n = recovered.len() as i64;
    let pairs = || {
        (0..n).filter_map(move |i| {
            let j = i + lag;
            (0..n)
                .contains(&j)
                .then(|| (recovered[j as usize], reference[i as usize]))
        })
    };
    let (cross, rec_power) = pairs().fold((C64::new(0.0, 0.0), 0.0), |(c, p), (r, s)| {
        (c + s * r.conj(), p + r.norm_sqr())
    });
    let gain = if rec_power > 0.0 {
        cross / rec_power
    } else {
        C64::new(0.0, 0.0)
    };
    let (err, refp, count) = pairs().fold((0.0, 0.0, 0usize), |(e, p, c), (r, s)| {
        (e + (r * gain - s).norm_sqr(), p + s.norm_sqr(), c + 1)
    });
    if count == 0 || refp == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(10.0 * libm::log10(err / refp))
}

/// Lag `l` maximizing `|sum_i rec[i + l] * conj(ref[i])|`, searched over
/// `(-n/2, n/2]` with a zero-padded FFT correlation.
fn best_lag(rec: &[C64], reference: &[C64]) -> i64 {
    let n = rec.len();
    let m = (2 * n).next_power_of_two();
    let plan = Fft::new(m);
    let mut a = vec![C64::new(0.0, 0.0); m];
    let mut b = vec![C64::new(0.0, 0.0); m];
    a[..n].copy_from_slice(rec);
    b[..n].copy_from_slice(reference);
    plan.forward(&mut a);
    plan.forward(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    plan.inverse(&mut a);
    let half = (n / 2) as i64;
    let mut best = (0i64, -1.0f64);
    for lag in (-half + 1)..=half {
        let idx = lag.rem_euclid(m as i64) as usize;
        let mag = a[idx].norm();
        if mag > best.1 {
            best = (lag, mag);
        }
    }
    best.0
}

/// Per-block complex multiplications of one recovery pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageCounts {
    pub sparse_dft: u64,
    pub forward_fft: u64,
    pub cd_multiply: u64,
    pub inverse_fft: u64,
    pub reextract: u64,
    pub correlation: u64,
}

impl StageCounts {
    pub fn total(&self) -> u64 {
        self.sparse_dft + self.forward_fft + self.cd_multiply + self.inverse_fft + self.reextract + self.correlation
    }

    pub fn from_ops(ops: &OpCounts, blocks: usize) -> Self {
        let b = blocks.max(1) as u64;
        StageCounts {
            sparse_dft: ops.sparse_dft / b,
            forward_fft: ops.fft / b,
            cd_multiply: ops.cd_multiply / b,
            inverse_fft: ops.ifft / b,
            reextract: ops.reextract / b,
            correlation: ops.correlation / b,
        }
    }
}

/// Closed-form complexity of both pipelines for an `N`-point block and `K`
/// band-edge points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub dft_size: usize,
    pub k_points: usize,
    /// K*N sparse DFT + K compensation multiplies + K/2 correlation terms.
    pub proposed: StageCounts,
    /// (N/2)log2(N) FFT + N multiplies + (N/2)log2(N) inverse + K*N bin
    /// re-extraction + K/2 correlation terms.
    pub full: StageCounts,
    /// One radix-2 N-point FFT, (N/2)log2(N).
    pub fft_mults: u64,
    /// The direct sparse DFT costs at least as much as a full FFT; the
    /// sparse path only wins on the compensation stage, not the transform.
    pub sparse_dft_exceeds_fft: bool,
}

impl ComplexityReport {
    pub fn proposed_total(&self) -> u64 {
        self.proposed.total()
    }

    pub fn full_total(&self) -> u64 {
        self.full.total()
    }

    pub fn counts_for(&self, mode: RecoveryMode) -> StageCounts {
        match mode {
            RecoveryMode::Proposed => self.proposed,
            RecoveryMode::FullComp => self.full,
            RecoveryMode::NoComp => StageCounts {
                sparse_dft: self.proposed.sparse_dft,
                correlation: self.proposed.correlation,
                ..StageCounts::default()
            },
        }
    }

    /// Plain-text table, one stage per line.
    pub fn to_text(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let p = &self.proposed;
        let f = &self.full;
        let _ = writeln!(
            s,
            "complex multiplications per block, N = {}, K = {}",
            self.dft_size, self.k_points
        );
        let _ = writeln!(s, "baseline: block FFT, N-point dispersion multiply, inverse FFT, then K-bin re-extraction (overlap-save bookkeeping excluded)");
        let _ = writeln!(s, "{:<28}{:>12}{:>12}", "stage", "proposed", "full_comp");
        let rows = [
            ("sparse band-edge DFT", p.sparse_dft, f.sparse_dft),
            ("forward FFT", p.forward_fft, f.forward_fft),
            ("dispersion multiply", p.cd_multiply, f.cd_multiply),
            ("inverse FFT", p.inverse_fft, f.inverse_fft),
            ("bin re-extraction", p.reextract, f.reextract),
            ("Godard correlation", p.correlation, f.correlation),
            ("total", p.total(), f.total()),
        ];
        for (name, a, b) in rows {
            let _ = writeln!(s, "{name:<28}{a:>12}{b:>12}");
        }
        if self.sparse_dft_exceeds_fft {
            let _ = writeln!(
                s,
                "note: K*N = {} >= one FFT ({}); the saving comes from skipping the full-band compensation",
                p.sparse_dft, self.fft_mults
            );
        }
        s
    }
}

pub fn complexity_report(dft_size: usize, k_points: usize) -> Result<ComplexityReport> {
    crate::rxdsp::bandedge_bins(dft_size, k_points)?;
    if !dft_size.is_power_of_two() {
        return Err(param_err!(
            "complexity formulas assume a power-of-two N, got {dft_size}"
        ));
    }
    let n = dft_size as u64;
    let k = k_points as u64;
    let fft = n / 2 * n.trailing_zeros() as u64;
    let proposed = StageCounts {
        sparse_dft: k * n,
        cd_multiply: k,
        correlation: k / 2,
        ..StageCounts::default()
    };
    let full = StageCounts {
        forward_fft: fft,
        cd_multiply: n,
        inverse_fft: fft,
        reextract: k * n,
        correlation: k / 2,
        ..StageCounts::default()
    };
    Ok(ComplexityReport {
        dft_size,
        k_points,
        proposed,
        full,
        fft_mults: fft,
        sparse_dft_exceeds_fft: k * n >= fft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rxdsp::TraceEntry;
    use crate::sigcore::Rng;

    fn trace_from(raw: &[f64], err: &[f64]) -> TimingTrace {
        TimingTrace {
            entries: raw
                .iter()
                .zip(err)
                .enumerate()
                .map(|(i, (&r, &e))| TraceEntry {
                    nominal_sample: i * 128,
                    raw_error_symbols: r,
                    est_phase_symbols: e,
                    true_phase_symbols: 0.0,
                    held: false,
                    locked: false,
                })
                .collect(),
        }
    }

    #[test]
    fn constant_error_has_zero_variance() {
        let t = trace_from(&[0.1; 300], &[0.0; 300]);
        assert!(timing_error_variance(&t, 200).unwrap().abs() < 1e-20);
        assert!(timing_error_variance(&t, 300).is_err());
    }

    #[test]
    fn variance_of_known_distribution() {
        let mut rng = Rng::new(4);
        let sigma = 0.03;
        let raw: Vec<f64> = (0..10_000).map(|_| sigma * rng.gaussian()).collect();
        let t = trace_from(&raw, &raw);
        let v = timing_error_variance(&t, 0).unwrap();
        assert!((v / (sigma * sigma) - 1.0).abs() < 0.1);
        let shifted: Vec<f64> = raw.iter().map(|x| x + 0.2).collect();
        let vs = timing_error_variance(&trace_from(&shifted, &raw), 0).unwrap();
        assert!((vs - v).abs() < 1e-12);
    }

    #[test]
    fn convergence_cases() {
        assert_eq!(convergence_time(&trace_from(&[0.0; 50], &[0.0; 50]), 0.02), Some(0));
        let growing: Vec<f64> = (0..100).map(|i| 0.001 * i as f64 + 0.03).collect();
        assert_eq!(convergence_time(&trace_from(&growing, &growing), 0.02), None);
        let mut settling = alloc::vec![0.1; 30];
        settling.extend([0.0; 25]);
        assert_eq!(convergence_time(&trace_from(&settling, &settling), 0.02), Some(30));
        // a whole-symbol slip still counts as converged
        assert_eq!(convergence_time(&trace_from(&[1.0; 25], &[1.0; 25]), 0.02), Some(0));
    }

    fn qam(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|_| {
                C64::new(
                    (rng.next_u64() % 4) as f64 * 2.0 - 3.0,
                    (rng.next_u64() % 4) as f64 * 2.0 - 3.0,
                )
            })
            .collect()
    }

    #[test]
    fn evm_identity_noise_and_orthogonal() {
        let x = qam(4096, 1);
        assert_eq!(evm(&x, &x).unwrap(), f64::NEG_INFINITY);

        let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        let sigma = libm::sqrt(p * 0.01 / 2.0);
        let mut rng = Rng::new(2);
        let noisy: Vec<C64> = x
            .iter()
            .map(|v| *v + C64::new(rng.gaussian(), rng.gaussian()) * sigma)
            .collect();
        let e = evm(&noisy, &x).unwrap();
        assert!((e + 20.0).abs() < 0.5, "{e}");

        let other = qam(4096, 3);
        let e = evm(&other, &x).unwrap();
        assert!(e.abs() < 0.5, "{e}");
        assert!(evm(&x[..10], &x).is_err());
    }

    #[test]
    fn evm_aligns_integer_lag() {
        let x = qam(2048, 5);
        let mut delayed = alloc::vec![C64::new(0.0, 0.0); 7];
        delayed.extend_from_slice(&x[..2048 - 7]);
        assert_eq!(evm(&delayed, &x).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn complexity_formulas() {
        let r = complexity_report(128, 12).unwrap();
        assert_eq!(r.proposed.sparse_dft, 1536);
        assert_eq!(r.proposed_total(), 1536 + 12 + 6);
        assert_eq!(r.fft_mults, 448);
        assert_eq!(r.full_total(), 448 + 128 + 448 + 1536 + 6);
        assert!(r.proposed_total() < r.full_total());
        let half = complexity_report(128, 6).unwrap();
        assert_eq!(half.proposed.sparse_dft * 2, r.proposed.sparse_dft);
        let dense = complexity_report(16, 8).unwrap();
        assert!(dense.sparse_dft_exceeds_fft);
        assert!(complexity_report(96, 12).is_err());
    }
}
