use alloc::vec::Vec;
use core::f64::consts::PI;

use super::RecoveryMode;
use crate::channel::{cd_phase, FiberSpec};
use crate::error::{param_err, Result};
use crate::sigcore::{bin_fraction, cis, Fft, SparseDft, C64};

/// Band-edge bin indices at 2 samples/symbol.
///
/// `upper` is centered on the +half-baud bin `N/4`, `lower[i]` is
/// `upper[i] - N/2 (mod N)`, exactly one symbol rate below its partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandEdgeBins {
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

impl BandEdgeBins {
    pub fn all(&self) -> Vec<usize> {
        self.upper.iter().chain(&self.lower).copied().collect()
    }
}

pub fn bandedge_bins(n: usize, k_points: usize) -> Result<BandEdgeBins> {
    if n < 4 || !n.is_multiple_of(4) {
        return Err(param_err!("DFT size must be a multiple of 4, got {n}"));
    }
    if k_points == 0 || !k_points.is_multiple_of(2) {
        return Err(param_err!(
            "band-edge point count must be even and positive, got {k_points}"
        ));
    }
    let half = k_points / 2;
    if half > n / 4 {
        return Err(param_err!("{k_points} band-edge points do not fit a {n}-point DFT"));
    }
    let first = n / 4 - k_points / 4;
    let upper: Vec<usize> = (first..first + half).collect();
    let lower = upper.iter().map(|&k| (k + n - n / 2) % n).collect();
    Ok(BandEdgeBins { upper, lower })
}

/// Multiplies each bin by `exp(+j*phi(sc_center + f_i))` for the residual
/// dispersion. Only these values are touched; no time-domain signal is
/// rebuilt.
pub fn inloop_cd_comp(bins: &[C64], bin_freqs_hz: &[f64], residual: &FiberSpec, sc_center_hz: f64) -> Vec<C64> {
    assert_eq!(bins.len(), bin_freqs_hz.len());
    bins.iter()
        .zip(bin_freqs_hz)
        .map(|(b, f)| *b * cis(cd_phase(sc_center_hz + f, residual)))
        .collect()
}

/// Complex multiplications spent by one detector evaluation, per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub sparse_dft: u64,
    pub cd_multiply: u64,
    pub correlation: u64,
    pub fft: u64,
    pub ifft: u64,
    pub reextract: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.sparse_dft + self.cd_multiply + self.correlation + self.fft + self.ifft + self.reextract
    }
}

/// Per-block band-edge extraction for one residual-dispersion value.
///
/// With group-delay alignment enabled, the upper and lower bin groups are
/// read from windows shifted by the residual group delay at each group's
/// center frequency (rounded to whole samples), and the compensation phase
/// carries the matching `exp(-j*2*pi*k*offset/N)` term. Both groups then
/// describe the same transmitted symbols even when the dispersion spread
/// exceeds the block length. With alignment disabled both windows coincide
/// with the block.
#[derive(Debug, Clone)]
pub struct BandEdgeDetector {
    n: usize,
    mode: RecoveryMode,
    bins: BandEdgeBins,
    upper_dft: SparseDft,
    lower_dft: SparseDft,
    upper_offset: i64,
    lower_offset: i64,
    upper_comp: Vec<C64>,
    lower_comp: Vec<C64>,
    fft: Fft,
    upper_full: Vec<C64>,
    lower_full: Vec<C64>,
}

impl BandEdgeDetector {
    pub fn new(
        n: usize,
        k_points: usize,
        mode: RecoveryMode,
        residual: &FiberSpec,
        sc_center_hz: f64,
        sample_rate_hz: f64,
        align_group_delay: bool,
    ) -> Result<Self> {
        let bins = bandedge_bins(n, k_points)?;
        residual.validate_coefficients()?;
        let freq = |k: usize| bin_fraction(k, n) * sample_rate_hz;
        let compensating = mode != RecoveryMode::NoComp;
        let offset = |group: &[usize]| -> i64 {
            if !(compensating && align_group_delay) {
                return 0;
            }
            let mean_f = group.iter().map(|&k| freq(k)).sum::<f64>() / group.len() as f64;
            libm::round(residual.group_delay_s(sc_center_hz + mean_f) * sample_rate_hz) as i64
        };
        let upper_offset = offset(&bins.upper);
        let lower_offset = offset(&bins.lower);
        let factor = |k: usize, off: i64| -> C64 {
            let realign = cis(-2.0 * PI * ((k as i64 * off).rem_euclid(n as i64)) as f64 / n as f64);
            cis(cd_phase(sc_center_hz + freq(k), residual)) * realign
        };
        let upper_comp = bins.upper.iter().map(|&k| factor(k, upper_offset)).collect();
        let lower_comp = bins.lower.iter().map(|&k| factor(k, lower_offset)).collect();
        let (upper_full, lower_full) = if mode == RecoveryMode::FullComp {
            (
                (0..n).map(|k| factor(k, upper_offset)).collect(),
                (0..n).map(|k| factor(k, lower_offset)).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(BandEdgeDetector {
            n,
            mode,
            upper_dft: SparseDft::new(n, &bins.upper)?,
            lower_dft: SparseDft::new(n, &bins.lower)?,
            bins,
            upper_offset,
            lower_offset,
            upper_comp,
            lower_comp,
            fft: Fft::new(n),
            upper_full,
            lower_full,
        })
    }

    pub fn bins(&self) -> &BandEdgeBins {
        &self.bins
    }

    pub fn mode(&self) -> RecoveryMode {
        self.mode
    }

    /// Window offsets (in samples, relative to the block start) of the upper
    /// and lower groups.
    pub fn offsets(&self) -> (i64, i64) {
        (self.upper_offset, self.lower_offset)
    }

    /// Sample range, relative to the block start, that must be available.
    pub fn span(&self) -> (i64, i64) {
        let lo = self.upper_offset.min(self.lower_offset).min(0);
        let hi = (self.upper_offset.max(self.lower_offset) + self.n as i64).max(self.n as i64);
        (lo, hi)
    }

    /// Evaluates the detector's own mode. `buf[i]` holds the sample at block
    /// offset `span().0 + i`. Returns (upper bins, lower bins).
    pub fn extract(&self, buf: &[C64], ops: &mut OpCounts) -> (Vec<C64>, Vec<C64>) {
        match self.mode {
            RecoveryMode::NoComp => self.raw_bins(buf, ops),
            RecoveryMode::Proposed => self.proposed_bins(buf, ops),
            RecoveryMode::FullComp => self.full_comp_bins(buf, ops),
        }
    }

    fn window<'a>(&self, buf: &'a [C64], offset: i64) -> &'a [C64] {
        let start = (offset - self.span().0) as usize;
        &buf[start..start + self.n]
    }

    /// Uncompensated bins of the block itself.
    pub fn raw_bins(&self, buf: &[C64], ops: &mut OpCounts) -> (Vec<C64>, Vec<C64>) {
        let w = self.window(buf, 0);
        ops.sparse_dft += self.upper_dft.mults() + self.lower_dft.mults();
        (self.upper_dft.eval(w), self.lower_dft.eval(w))
    }

    /// Sparse DFT of the band-edge bins followed by the K-point in-loop
    /// compensation.
    pub fn proposed_bins(&self, buf: &[C64], ops: &mut OpCounts) -> (Vec<C64>, Vec<C64>) {
        let mut up = self.upper_dft.eval(self.window(buf, self.upper_offset));
        let mut lo = self.lower_dft.eval(self.window(buf, self.lower_offset));
        for (v, c) in up.iter_mut().zip(&self.upper_comp) {
            *v *= *c;
        }
        for (v, c) in lo.iter_mut().zip(&self.lower_comp) {
            *v *= *c;
        }
        ops.sparse_dft += self.upper_dft.mults() + self.lower_dft.mults();
        ops.cd_multiply += (up.len() + lo.len()) as u64;
        (up, lo)
    }

    /// Baseline: full N-point transform, compensation of every bin, inverse
    /// transform back to a compensated block, then band-edge re-extraction.
    /// Done once per distinct window.
    pub fn full_comp_bins(&self, buf: &[C64], ops: &mut OpCounts) -> (Vec<C64>, Vec<C64>) {
        assert!(!self.upper_full.is_empty(), "detector not built for full compensation");
        let butterflies = (self.n / 2) as u64 * self.n.trailing_zeros() as u64;
        let mut compensate = |offset: i64, phases: &[C64], dft: &SparseDft| -> Vec<C64> {
            let mut block = self.window(buf, offset).to_vec();
            self.fft.forward(&mut block);
            for (v, c) in block.iter_mut().zip(phases) {
                *v *= *c;
            }
            self.fft.inverse(&mut block);
            ops.fft += butterflies;
            ops.ifft += butterflies;
            ops.cd_multiply += self.n as u64;
            ops.reextract += dft.mults();
            dft.eval(&block)
        };
        if self.upper_offset == self.lower_offset {
            let mut block = self.window(buf, self.upper_offset).to_vec();
            self.fft.forward(&mut block);
            for (v, c) in block.iter_mut().zip(&self.upper_full) {
                *v *= *c;
            }
            self.fft.inverse(&mut block);
            ops.fft += butterflies;
            ops.ifft += butterflies;
            ops.cd_multiply += self.n as u64;
            ops.reextract += self.upper_dft.mults() + self.lower_dft.mults();
            (self.upper_dft.eval(&block), self.lower_dft.eval(&block))
        } else {
            let up = compensate(self.upper_offset, &self.upper_full, &self.upper_dft);
            let lo = compensate(self.lower_offset, &self.lower_full, &self.lower_dft);
            (up, lo)
        }
    }

    /// The same detector in another mode (used to cross-check paths on
    /// identical input).
    pub fn with_mode(
        &self,
        mode: RecoveryMode,
        residual: &FiberSpec,
        sc_center_hz: f64,
        sample_rate_hz: f64,
        align_group_delay: bool,
    ) -> Result<Self> {
        BandEdgeDetector::new(
            self.n,
            self.bins.upper.len() * 2,
            mode,
            residual,
            sc_center_hz,
            sample_rate_hz,
            align_group_delay,
        )
    }
}

/// Signed baseband frequencies of `bins` for an `n`-point DFT at
/// `sample_rate_hz`.
pub fn bin_frequencies(bins: &[usize], n: usize, sample_rate_hz: f64) -> Vec<f64> {
    bins.iter().map(|&k| bin_fraction(k, n) * sample_rate_hz).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::apply_cd_at;
    use crate::sigcore::{dft_sparse, ComplexWaveform, Rng};

    #[test]
    fn reference_bin_sets() {
        let b = bandedge_bins(128, 12).unwrap();
        assert_eq!(b.upper, (29..=34).collect::<Vec<_>>());
        assert_eq!(b.lower, (93..=98).collect::<Vec<_>>());
        let b = bandedge_bins(8, 2).unwrap();
        assert_eq!((b.upper, b.lower), (alloc::vec![2], alloc::vec![6]));
        for (n, k) in [(128, 12), (64, 4), (256, 32), (16, 8)] {
            let b = bandedge_bins(n, k).unwrap();
            for (u, l) in b.upper.iter().zip(&b.lower) {
                assert_eq!((u + n - l) % n, n / 2);
            }
        }
        assert!(bandedge_bins(128, 66).is_err());
        assert!(bandedge_bins(128, 7).is_err());
    }

    #[test]
    fn comp_identity_and_additivity() {
        let mut rng = Rng::new(1);
        let bins: Vec<C64> = (0..12).map(|_| C64::new(rng.gaussian(), rng.gaussian())).collect();
        let freqs: Vec<f64> = (0..12).map(|i| 14e9 + i as f64 * 1e9).collect();
        let zero = FiberSpec::standard(0.0).unwrap();
        assert_eq!(inloop_cd_comp(&bins, &freqs, &zero, 3e9), bins);
        let a = inloop_cd_comp(
            &inloop_cd_comp(&bins, &freqs, &zero.with_length(100.0), 3e9),
            &freqs,
            &zero.with_length(60.0),
            3e9,
        );
        let b = inloop_cd_comp(&bins, &freqs, &zero.with_length(160.0), 3e9);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9 * y.norm());
        }
    }

    #[test]
    fn comp_restores_periodic_waveform_bins() {
        // a block-periodic waveform has a line spectrum on the DFT grid, so
        // circular dispersion acts bin by bin and compensation is exact
        let n = 128;
        let fs = 64e9;
        let mut rng = Rng::new(2);
        let period: Vec<C64> = (0..n).map(|_| C64::new(rng.gaussian(), rng.gaussian())).collect();
        let clean = ComplexWaveform::new(period.clone(), fs).unwrap();
        let fiber = FiberSpec::standard(80.0).unwrap();
        let dispersed = apply_cd_at(&clean, &fiber, 10e9).unwrap();
        let b = bandedge_bins(n, 12).unwrap().all();
        let freqs = bin_frequencies(&b, n, fs);
        let got = inloop_cd_comp(&dft_sparse(dispersed.samples(), &b).unwrap(), &freqs, &fiber, 10e9);
        let want = dft_sparse(clean.samples(), &b).unwrap();
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).norm() <= 1e-6 * y.norm());
        }
    }

    #[test]
    fn proposed_equals_full_comp_bins() {
        let n = 128;
        let fs = 128e9;
        let fiber = FiberSpec::standard(320.0).unwrap();
        for align in [false, true] {
            let p = BandEdgeDetector::new(n, 12, RecoveryMode::Proposed, &fiber, 0.0, fs, align).unwrap();
            let f = p.with_mode(RecoveryMode::FullComp, &fiber, 0.0, fs, align).unwrap();
            assert_eq!(p.span(), f.span());
            let (lo, hi) = p.span();
            let mut rng = Rng::new(3);
            let buf: Vec<C64> = (lo..hi).map(|_| C64::new(rng.gaussian(), rng.gaussian())).collect();
            let mut ops = OpCounts::default();
            let (pu, pl) = p.extract(&buf, &mut ops);
            let (fu, fl) = f.extract(&buf, &mut ops);
            for (x, y) in pu.iter().chain(&pl).zip(fu.iter().chain(&fl)) {
                assert!((x - y).norm() <= 1e-9 * y.norm());
            }
        }
    }

    #[test]
    fn alignment_offsets_follow_group_delay() {
        let fs = 128e9;
        let fiber = FiberSpec::standard(320.0).unwrap();
        let d = BandEdgeDetector::new(128, 12, RecoveryMode::Proposed, &fiber, 0.0, fs, true).unwrap();
        let (u, l) = d.offsets();
        // +-31.5 GHz group centers: tau = coeff * f / pi ~ +-1.29 ns ~ +-166 samples
        assert!(u > 150 && u < 180, "upper offset {u}");
        assert!(l < -150 && l > -185, "lower offset {l}");
        let raw = BandEdgeDetector::new(128, 12, RecoveryMode::NoComp, &fiber, 0.0, fs, true).unwrap();
        assert_eq!(raw.offsets(), (0, 0));
        assert_eq!(raw.span(), (0, 128));
    }
}
