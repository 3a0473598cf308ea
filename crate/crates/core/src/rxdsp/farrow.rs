use crate::error::{Error, Result};
use crate::sigcore::C64;

/// Cubic Lagrange interpolation through `x[basepoint-1 ..= basepoint+2]`,
/// evaluated at `basepoint + mu`, in Farrow (Horner) form.
pub fn farrow_interpolate(x: &[C64], basepoint: i64, mu: f64) -> Result<C64> {
    if basepoint < 1 || basepoint + 2 >= x.len() as i64 {
        return Err(Error::Boundary {
            index: basepoint,
            len: x.len(),
        });
    }
    let b = basepoint as usize;
    let (xm1, x0, x1, x2) = (x[b - 1], x[b], x[b + 1], x[b + 2]);
    let c0 = x0;
    let c1 = -xm1 / 3.0 - x0 / 2.0 + x1 - x2 / 6.0;
    let c2 = (xm1 + x1) / 2.0 - x0;
    let c3 = (x2 - xm1) / 6.0 + (x0 - x1) / 2.0;
    Ok(((c3 * mu + c2) * mu + c1) * mu + c0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::{cis, ideal_fractional_delay, ComplexWaveform};
    use alloc::vec::Vec;
    use core::f64::consts::PI;

    #[test]
    fn mu_zero_returns_basepoint_sample() {
        let x: Vec<C64> = (0..8).map(|i| C64::new(i as f64 * 1.7, -(i as f64))).collect();
        assert_eq!(farrow_interpolate(&x, 3, 0.0).unwrap(), x[3]);
    }

    #[test]
    fn cubic_polynomials_are_exact() {
        let p = |t: f64| C64::new(0.5 * t * t * t - 2.0 * t * t + t - 3.0, -t * t * t + 0.25 * t);
        let x: Vec<C64> = (0..10).map(|i| p(i as f64)).collect();
        for mu in [0.0, 0.1, 0.37, 0.5, 0.99] {
            let y = farrow_interpolate(&x, 4, mu).unwrap();
            assert!((y - p(4.0 + mu)).norm() < 1e-12, "mu={mu}");
        }
    }

    #[test]
    fn boundary_checked() {
        let x = alloc::vec![C64::new(0.0, 0.0); 6];
        assert!(farrow_interpolate(&x, 0, 0.5).is_err());
        assert!(farrow_interpolate(&x, 4, 0.5).is_err());
        assert!(farrow_interpolate(&x, 3, 0.5).is_ok());
    }

    fn tone_error(cycles_per_sample: f64) -> f64 {
        // whole number of cycles so the circular reference delay has no leakage
        let n = 260;
        let x: Vec<C64> = (0..n).map(|i| cis(2.0 * PI * cycles_per_sample * i as f64)).collect();
        let w = ComplexWaveform::new(x.clone(), 1.0).unwrap();
        // advancing by half a sample: ideal value at 100.5 sits at index 100
        let ideal = ideal_fractional_delay(&w, -0.5).unwrap();
        (farrow_interpolate(&x, 100, 0.5).unwrap() - ideal.samples()[100]).norm()
    }

    #[test]
    fn tone_matches_ideal_delay() {
        // cubic Lagrange response at mu = 1/2 is 1.125 cos(w/2) - 0.125 cos(3w/2):
        // 0.99647 at 0.1 fs, 0.99977 at 0.05 fs
        let e10 = tone_error(0.1);
        assert!((e10 - 3.53e-3).abs() < 0.05e-3, "0.1 fs error {e10}");
        assert!(tone_error(0.05) < 1e-3);
    }
}
