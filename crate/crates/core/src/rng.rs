//! Counter-based random streams.
//!
//! Every random quantity in an experiment is addressed by
//! `(seed, purpose, trial, index)`. The ChaCha block function is keyed by
//! `(seed, purpose)`, the 64-bit ChaCha stream id carries the trial, and the
//! word position carries the index, so a trial's draws never depend on how
//! many trials ran before it or on which thread ran them.

use core::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Coefficients = 1,
    Dilation = 2,
    Unitary = 3,
    Perturbation = 4,
    Uniform = 5,
    Regions = 6,
}

/// Words consumed by one complex Gaussian draw (two `u64`).
const WORDS_PER_COMPLEX: u128 = 4;

#[derive(Clone, Debug)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, purpose: Purpose, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(b"gafzero\0");
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial);
        Self { inner }
    }

    /// Positions the stream so the next complex draw is the `index`-th one.
    pub fn seek_complex(&mut self, index: u64) {
        self.inner
            .set_word_pos(u128::from(index) * WORDS_PER_COMPLEX);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `(0, 1]` with 53 bits of resolution.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard complex Gaussian with `E|z|^2 = 1` (each component has
    /// variance 1/2), via the polar Box-Muller map.
    pub fn complex_normal(&mut self) -> C64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        C64::from_polar(r, TAU * u2)
    }

    /// Real standard normal (consumes one complex draw).
    pub fn normal(&mut self) -> f64 {
        self.complex_normal().re * core::f64::consts::SQRT_2
    }
}

/// The `index`-th standard complex Gaussian of trial `trial`.
pub fn complex_normal_at(seed: u64, purpose: Purpose, trial: u64, index: u64) -> C64 {
    let mut rng = CounterRng::new(seed, purpose, trial);
    rng.seek_complex(index);
    rng.complex_normal()
}
