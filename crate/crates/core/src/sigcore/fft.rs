use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{cis, C64};

/// Forward/inverse FFT plan for one transform length.
///
/// Power-of-two lengths use an iterative radix-2 kernel; every other length
/// goes through Bluestein's chirp-z algorithm on a padded radix-2 transform.
/// Forward transforms are unnormalized, inverse transforms carry `1/n`.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Trivial,
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<C64>,
        kernel_spectrum: Vec<C64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<C64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2).map(|k| cis(-2.0 * PI * k as f64 / n as f64)).collect();
        Radix2 { n, twiddles }
    }

    fn forward(&self, data: &mut [C64]) {
        let n = self.n;
        if n < 2 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        let kind = if n <= 1 {
            Kind::Trivial
        } else if n.is_power_of_two() {
            Kind::Radix2(Radix2::new(n))
        } else {
            let m = (2 * n - 1).next_power_of_two();
            let inner = Radix2::new(m);
            // k^2 mod 2n keeps the chirp angle small and exact for large n.
            let two_n = 2 * n as u128;
            let chirp: Vec<C64> = (0..n)
                .map(|k| {
                    let k2 = ((k as u128 * k as u128) % two_n) as f64;
                    cis(-PI * k2 / n as f64)
                })
                .collect();
            let mut kernel = vec![C64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for k in 1..n {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            }
        };
        Fft { n, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform. `data.len()` must equal the plan length.
    pub fn forward(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n, "FFT length mismatch");
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2(r) => r.forward(data),
            Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.n;
                let mut work = vec![C64::new(0.0, 0.0); m];
                for (w, (x, c)) in work.iter_mut().zip(data.iter().zip(chirp)) {
                    *w = *x * *c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_spectrum) {
                    *w = (*w * *k).conj();
                }
                // inverse via conjugation: ifft(y) = conj(fft(conj(y))) / m
                inner.forward(&mut work);
                let scale = 1.0 / m as f64;
                for (x, (w, c)) in data.iter_mut().zip(work.iter().zip(chirp)) {
                    *x = w.conj() * scale * *c;
                }
            }
        }
    }

    /// In-place inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        for x in data.iter_mut() {
            *x = x.conj();
        }
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x = x.conj() * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| *v * cis(-2.0 * PI * ((k * i) % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn ramp(n: usize) -> Vec<C64> {
        (0..n)
            .map(|i| C64::new(libm::sin(0.37 * i as f64), libm::cos(1.3 * i as f64 + 0.2)))
            .collect()
    }

    #[test]
    fn matches_naive_for_pow2_and_odd_lengths() {
        for n in [2usize, 3, 5, 8, 12, 17, 64, 100, 128, 131] {
            let x = ramp(n);
            let mut y = x.clone();
            Fft::new(n).forward(&mut y);
            let want = naive(&x);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).norm() < 1e-9 * n as f64, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for n in [16usize, 33, 1000] {
            let x = ramp(n);
            let mut y = x.clone();
            let plan = Fft::new(n);
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-11);
            }
        }
    }
}
