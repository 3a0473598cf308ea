use core::f64::consts::PI;

use crate::sigcore::C64;

/// Correlation magnitude below this fraction of the mean band-edge bin
/// energy marks a block as carrying no usable clock tone.
pub const RELIABILITY_THRESHOLD: f64 = 1e-9;

/// Output of the band-edge Godard detector for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TedEstimate {
    /// Estimated residual sampling delay in symbols, within `(-0.5, 0.5]`.
    /// Positive means the block is sampled late.
    pub error_symbols: f64,
    pub correlation: C64,
    pub reliable: bool,
}

/// Godard timing error from symbol-rate-spaced band-edge bin pairs.
///
/// `S = sum_i upper[i] * conj(lower[i])`; a delay of `d` symbols rotates `S`
/// by `-2*pi*d`, so the estimate is `-arg(S) / 2*pi`.
pub fn godard_ted(upper: &[C64], lower: &[C64]) -> TedEstimate {
    assert_eq!(upper.len(), lower.len(), "band-edge groups must pair up");
    assert!(!upper.is_empty(), "need at least one bin pair");
    let s: C64 = upper.iter().zip(lower).map(|(u, l)| *u * l.conj()).sum();
    let energy: f64 = upper.iter().chain(lower).map(|v| v.norm_sqr()).sum::<f64>() / (2 * upper.len()) as f64;
    let reliable = s.norm() > RELIABILITY_THRESHOLD * energy && energy > 0.0;
    let mut e = -libm::atan2(s.im, s.re) / (2.0 * PI);
    if e <= -0.5 {
        e += 1.0;
    }
    TedEstimate {
        error_symbols: if reliable { e } else { 0.0 },
        correlation: s,
        reliable,
    }
}
