use alloc::vec::Vec;

use crate::error::{param_err, Result};
use crate::sigcore::{freq_shift, ComplexWaveform, RrcFilter, C64};
use crate::txchain::{integer_ratio, DscmPlan};

/// Shifts subcarrier `sc_index` to 0 Hz, applies the RRC matched filter and
/// decimates to exactly 2 samples per symbol.
///
/// The filter is zero-phase (centered), so transmitted symbol timing is kept
/// on even output indices, and scaled so that the shaping/matched pair has
/// unit gain at any decimation factor.
pub fn subcarrier_downconvert(
    aggregate: &ComplexWaveform,
    plan: &DscmPlan,
    sc_index: usize,
    span_symbols: usize,
) -> Result<ComplexWaveform> {
    if sc_index >= plan.n_subcarriers {
        return Err(param_err!("subcarrier {sc_index} of {}", plan.n_subcarriers));
    }
    let decim = integer_ratio(aggregate.sample_rate_hz(), 2.0 * plan.baud_per_sc_hz)?;
    let shifted = freq_shift(aggregate, -plan.sc_center_freqs_hz[sc_index])?;
    let filt = RrcFilter::design(plan.roll_off, 2 * decim, span_symbols)?;
    let gain = 1.0 / libm::sqrt(decim as f64);
    let taps: Vec<f64> = filt.taps().iter().map(|t| t * gain).collect();
    let center = filt.delay() as i64;
    let src = shifted.samples();
    let len = src.len() as i64;
    let n_out = src.len().div_ceil(decim);
    let out = (0..n_out)
        .map(|j| {
            let pos = (j * decim) as i64 + center;
            let mut acc = C64::new(0.0, 0.0);
            // z[pos - center] = sum_i h[i] x[pos - i]
            let i_lo = (pos - len + 1).max(0) as usize;
            let i_hi = (pos + 1).min(taps.len() as i64) as usize;
            for i in i_lo..i_hi {
                acc += src[(pos - i as i64) as usize] * taps[i];
            }
            acc
        })
        .collect();
    ComplexWaveform::new(out, 2.0 * plan.baud_per_sc_hz)
}
