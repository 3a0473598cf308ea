use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{cis, Fft, C64};
use crate::error::{param_err, Result};

/// Forward DFT, `X[k] = sum_n x[n] exp(-j2*pi*k*n/N)`, unnormalized.
pub fn dft_full(x: &[C64]) -> Result<Vec<C64>> {
    if x.len() < 2 {
        return Err(param_err!("DFT size must be at least 2, got {}", x.len()));
    }
    let mut out = x.to_vec();
    Fft::new(x.len()).forward(&mut out);
    Ok(out)
}

/// Inverse DFT with the `1/N` factor.
pub fn idft_full(x: &[C64]) -> Result<Vec<C64>> {
    if x.len() < 2 {
        return Err(param_err!("DFT size must be at least 2, got {}", x.len()));
    }
    let mut out = x.to_vec();
    Fft::new(x.len()).inverse(&mut out);
    Ok(out)
}

/// Direct evaluation of a fixed subset of DFT bins.
///
/// Costs `K * N` complex multiplications per block, independent of whether
/// `N` is a power of two.
#[derive(Debug, Clone)]
pub struct SparseDft {
    n: usize,
    bins: Vec<usize>,
    twiddles: Vec<C64>,
}

impl SparseDft {
    pub fn new(n: usize, bins: &[usize]) -> Result<Self> {
        if n < 2 {
            return Err(param_err!("DFT size must be at least 2, got {n}"));
        }
        if let Some(&bad) = bins.iter().find(|&&k| k >= n) {
            return Err(param_err!("bin {bad} out of range for {n}-point DFT"));
        }
        let twiddles = (0..n).map(|m| cis(-2.0 * PI * m as f64 / n as f64)).collect();
        Ok(SparseDft {
            n,
            bins: bins.to_vec(),
            twiddles,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    /// Complex multiplications spent by one call to [`SparseDft::eval_into`].
    pub fn mults(&self) -> u64 {
        (self.bins.len() * self.n) as u64
    }

    /// Writes one value per requested bin into `out`. `block` must hold
    /// exactly `N` samples.
    pub fn eval_into(&self, block: &[C64], out: &mut [C64]) {
        assert_eq!(block.len(), self.n, "block length must equal DFT size");
        assert_eq!(out.len(), self.bins.len());
        for (dst, &k) in out.iter_mut().zip(&self.bins) {
            let mut acc = C64::new(0.0, 0.0);
            let mut idx = 0usize;
            for x in block {
                acc += *x * self.twiddles[idx];
                idx += k;
                if idx >= self.n {
                    idx -= self.n;
                }
            }
            *dst = acc;
        }
    }

    pub fn eval(&self, block: &[C64]) -> Vec<C64> {
        let mut out = alloc::vec![C64::new(0.0, 0.0); self.bins.len()];
        self.eval_into(block, &mut out);
        out
    }
}

/// One-shot sparse DFT of `x` at `bins`.
pub fn dft_sparse(x: &[C64], bins: &[usize]) -> Result<Vec<C64>> {
    Ok(SparseDft::new(x.len(), bins)?.eval(x))
}
