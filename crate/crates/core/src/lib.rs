//! Core numerics for the zero sets of the canonical Gaussian analytic
//! functions (elliptic, flat and hyperbolic ensembles).
//!
//! Everything in this crate is pure computation over `alloc` collections:
//! sampling from a counter-based stream, series evaluation, certified zero
//! extraction, closed-form laws used as oracles, estimators, and the
//! matching algorithms. Parallel experiment harnesses, file formats and the
//! command line live in the `gafzero` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod estimate;
pub mod fft;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod testfn;
pub mod unitary;

pub use num_complex::Complex64 as C64;

pub use model::{
    Family, GafSample, IsometrySpec, ModelError, ModelSpec, Truncation, TRUNCATION_TOL,
};

pub use roots::{
    elliptic_roots, find_zeros, winding_count, Region, RootError, RootOptions, Winding, ZeroSet,
};
