//! Segmented differential privacy for set-valued frequency estimation in
//! the multi-message shuffle model.
//!
//! Users pick one of `K` privacy levels, randomize each of their items with
//! a level-specific Poisson rate, and add uniform blanket messages shared by
//! the whole population. The crate provides:
//!
//! - [`amplify`]: an exact hockey-stick accountant for the shuffled output;
//! - [`optimize`]: blanket-rate and per-level rate selection under that
//!   accountant;
//! - [`protocol`]: an in-process simulation of the protocol and its
//!   debiased estimator;
//! - [`baselines`]: uniform-privacy and per-segment comparison protocols;
//! - [`data`]: dataset loading and synthesis;
//! - [`experiment`]: the MSE-versus-blanket-rate harness.

pub mod amplify;
pub mod baselines;
mod binom;
pub mod data;
pub mod error;
pub mod experiment;
pub mod optimize;
pub mod protocol;
pub mod rng;
mod sum;

/// Order-preserving map, fanned out across threads when `parallel` is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

pub use error::{Error, Result};
pub use sum::CompensatedSum;
