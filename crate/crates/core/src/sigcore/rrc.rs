use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{param_err, Result};

/// Root-raised-cosine FIR, unit energy, `span_symbols * sps + 1` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    roll_off: f64,
    sps: usize,
    span_symbols: usize,
    taps: Vec<f64>,
}

impl RrcFilter {
    pub fn design(roll_off: f64, sps: usize, span_symbols: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&roll_off) {
            return Err(param_err!("roll-off must lie in [0, 1], got {roll_off}"));
        }
        if sps < 1 {
            return Err(param_err!("samples per symbol must be at least 1"));
        }
        if span_symbols < 2 || !span_symbols.is_multiple_of(2) {
            return Err(param_err!(
                "span must be an even number of symbols >= 2, got {span_symbols}"
            ));
        }
        let len = span_symbols * sps + 1;
        let center = (len / 2) as i64;
        let mut taps: Vec<f64> = (0..len as i64)
            .map(|i| rrc_impulse((i - center).unsigned_abs() as f64 / sps as f64, roll_off))
            .collect();
        let norm = libm::sqrt(taps.iter().map(|t| t * t).sum::<f64>());
        for t in &mut taps {
            *t /= norm;
        }
        Ok(RrcFilter {
            roll_off,
            sps,
            span_symbols,
            taps,
        })
    }

    pub fn roll_off(&self) -> f64 {
        self.roll_off
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn span_symbols(&self) -> usize {
        self.span_symbols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Group delay in samples (the index of the center tap).
    pub fn delay(&self) -> usize {
        self.taps.len() / 2
    }
}

/// Continuous RRC pulse at `t` symbol periods (unnormalized, T = 1).
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let four_bt = 4.0 * beta * t;
    if beta > 0.0 && libm::fabs(1.0 - four_bt * four_bt) < 1e-10 {
        // removable singularity at t = 1/(4 beta)
        let a = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * libm::sin(a) + (1.0 - 2.0 / PI) * libm::cos(a));
    }
    let num = libm::sin(PI * t * (1.0 - beta)) + four_bt * libm::cos(PI * t * (1.0 + beta));
    num / (PI * t * (1.0 - four_bt * four_bt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_convolve(h: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; 2 * h.len() - 1];
        for (i, a) in h.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    }

    #[test]
    fn paper_rolloff_length_symmetry_energy() {
        let f = RrcFilter::design(0.1, 2, 32).unwrap();
        assert_eq!(f.taps().len(), 65);
        let energy: f64 = f.taps().iter().map(|t| t * t).sum();
        assert!((energy - 1.0).abs() < 1e-12);
        let t = f.taps();
        let peak = t[f.delay()];
        for i in 0..t.len() {
            assert!((t[i] - t[t.len() - 1 - i]).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn zero_rolloff_is_sinc() {
        let f = RrcFilter::design(0.0, 1, 16).unwrap();
        let t = f.taps();
        let c = f.delay();
        for (i, v) in t.iter().enumerate() {
            if i != c {
                assert!(v.abs() < 1e-9, "tap {i} = {v}");
            }
        }
        assert!(t[c] > 0.99);
    }

    #[test]
    fn singular_points_are_finite_and_continuous() {
        // beta = 0.25, sps = 4: t = 1/(4 beta) = 1 symbol lands exactly on a tap
        let f = RrcFilter::design(0.25, 4, 8).unwrap();
        let t = f.taps();
        assert!(t.iter().all(|v| v.is_finite()));
        let exact = rrc_impulse(1.0, 0.25);
        let near = rrc_impulse(1.0 + 1e-7, 0.25);
        assert!((exact - near).abs() < 1e-6);
    }

    #[test]
    fn matched_pair_isi_below_minus_40_db() {
        for sps in [2usize, 4, 16] {
            let f = RrcFilter::design(0.1, sps, 32).unwrap();
            let rc = self_convolve(f.taps());
            let center = rc.len() / 2;
            let main = rc[center];
            let isi_power: f64 = (1..=center / sps)
                .flat_map(|m| [rc[center + m * sps], rc[center - m * sps]])
                .map(|v| v * v)
                .sum();
            let db = 10.0 * libm::log10(isi_power / (main * main));
            assert!(db <= -40.0, "sps={sps}: ISI {db} dB");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RrcFilter::design(1.5, 2, 32).is_err());
        assert!(RrcFilter::design(0.1, 0, 32).is_err());
        assert!(RrcFilter::design(0.1, 2, 31).is_err());
        assert!(RrcFilter::design(0.1, 2, 0).is_err());
    }
}
