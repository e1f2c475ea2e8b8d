//! Radix-2 FFT used to evaluate a power series on whole circles at once.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::C64;

/// Precomputed plan for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    len: usize,
    twiddles: Vec<C64>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "fft length must be a power of two");
        let twiddles = (0..len / 2)
            .map(|k| C64::from_polar(1.0, TAU * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Self {
            len,
            twiddles,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In place `X_m = sum_j x_j exp(+2 pi i j m / n)`, unnormalized.
    ///
    /// With `x_j` the folded series coefficients `sum_{k = j mod n} c_k r^k`
    /// this yields `f(r e^{2 pi i m / n})` exactly.
    pub fn evaluate_on_circle(&self, buf: &mut [C64]) {
        self.run(buf, false)
    }

    /// In place `X_m = sum_j x_j exp(-2 pi i j m / n)`, unnormalized.
    pub fn forward(&self, buf: &mut [C64]) {
        self.run(buf, true)
    }

    fn run(&self, buf: &mut [C64], conjugate: bool) {
        let n = self.len;
        assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if conjugate {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}
