//! Experiment harness, file formats and command line for the zero sets of
//! Gaussian analytic functions. Numerics live in `gafzero-core`.

pub mod cli;
pub mod config;
pub mod harness;
pub mod io;
pub mod stats;
pub mod transport;

pub use config::RunConfig;
