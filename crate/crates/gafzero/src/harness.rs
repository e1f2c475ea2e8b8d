//! Parallel trial execution with worker-count independent results.
//!
//! Trials run on the current rayon pool and results come back in trial
//! order, so every aggregate computed from them is a pure function of
//! `(seed, trials)`.

use gafzero_core::model::Truncation;
use gafzero_core::{find_zeros, GafSample, ModelSpec, Region, RootOptions, ZeroSet};
use rayon::prelude::*;
use serde::Serialize;

/// Runs `f(trial)` for `trial in 0..trials` and returns the results in
/// trial order.
pub fn run_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Runs `body` on a dedicated pool of `workers` threads (all cores when
/// `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, body: impl FnOnce() -> R + Send) -> R {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    match builder.build() {
        Ok(pool) => pool.install(body),
        Err(_) => body(),
    }
}

/// Independent sub-seed for the `tag`-th component of an experiment
/// (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Why a trial was excluded from the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Discard {
    /// A zero sat on the contour and the region had to be dilated.
    Dilated,
    /// The certificate was refused.
    Uncertified,
    /// The zero finder returned an error.
    Failed,
}

/// Certified zeros of one trial, or the reason it was discarded.
pub type TrialZeros = Result<ZeroSet, Discard>;

/// Samples trial `trial` and extracts its zeros in `region`.
pub fn trial_zeros(
    model: &ModelSpec,
    truncation: &Truncation,
    region: &Region,
    opts: &RootOptions,
    seed: u64,
    trial: u64,
) -> TrialZeros {
    let sample = GafSample::draw(model, truncation, seed, trial);
    certified_zeros(&sample, region, opts)
}

pub fn certified_zeros(sample: &GafSample, region: &Region, opts: &RootOptions) -> TrialZeros {
    match find_zeros(sample, region, opts) {
        Ok(z) if z.was_dilated() => Err(Discard::Dilated),
        Ok(z) if !z.certificate_ok => Err(Discard::Uncertified),
        Ok(z) => Ok(z),
        Err(_) => Err(Discard::Failed),
    }
}

/// Discard tally of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DiscardTally {
    pub dilated: u64,
    pub uncertified: u64,
    pub failed: u64,
}

impl DiscardTally {
    pub fn from_outcomes<T>(outcomes: &[Result<T, Discard>]) -> Self {
        let mut t = Self::default();
        for o in outcomes {
            match o {
                Err(Discard::Dilated) => t.dilated += 1,
                Err(Discard::Uncertified) => t.uncertified += 1,
                Err(Discard::Failed) => t.failed += 1,
                Ok(_) => {}
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.dilated + self.uncertified + self.failed
    }
}

/// Largest discard fraction for a valid experiment.
pub const MAX_DISCARD_RATE: f64 = 0.01;
