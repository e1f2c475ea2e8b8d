//! Haar-distributed unitary matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{CounterRng, Purpose};
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

/// Dense square complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    n: usize,
    a: Vec<C64>,
}

impl Unitary {
    pub fn identity(n: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = C64::new(1.0, 0.0);
        }
        Self { n, a }
    }

    /// Gram–Schmidt orthonormalization of the columns of an i.i.d. complex
    /// Gaussian matrix. Fixing the diagonal of `R` positive makes the law
    /// of `Q` exactly Haar.
    pub fn haar(n: usize, seed: u64, trial: u64) -> Self {
        let mut rng = CounterRng::new(seed, Purpose::Unitary, trial);
        let mut cols: Vec<Vec<C64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.complex_normal()).collect())
            .collect();
        for j in 0..n {
            // Two passes keep orthogonality at rounding level.
            for _ in 0..2 {
                for k in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let q = &done[k];
                    let v = &mut rest[0];
                    let dot: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= dot * qi;
                    }
                }
            }
            let norm = cols[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for c in cols[j].iter_mut() {
                *c /= norm;
            }
        }
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for (j, col) in cols.iter().enumerate() {
            for (i, c) in col.iter().enumerate() {
                a[i * n + j] = *c;
            }
        }
        Self { n, a }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    /// `U x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.a[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(u, v)| u * v)
                    .sum()
            })
            .collect()
    }

    /// `U^T x`: the coefficients of `Σ_k x_k g_k` in the original basis when
    /// `g_k = Σ_j U_{kj} f_j`.
    pub fn apply_transpose(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (k, xk) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.a[k * self.n + j] * xk;
            }
        }
        out
    }

    /// `max |U* U - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: C64 = (0..n).map(|k| self.get(k, i).conj() * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}
