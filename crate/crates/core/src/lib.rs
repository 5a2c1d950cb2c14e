//! Kernel-adaptive, mode-hopping Markov chain Monte Carlo for grasp learning.
//!
//! The crate combines a kernel-adaptive Metropolis-Hastings sampler
//! ([`kameleon`]) with ellipsoidal jump regions around known modes
//! ([`darting`]) and applies the pair to learning grasp densities over
//! 7D gripper poses ([`grasp`], [`learning`]). [`harness`] wires the
//! pieces into seeded, reproducible experiments.
//!
//! Every stochastic operation takes its random number generator explicitly;
//! there is no global RNG state, so runs with the same seed are bit-identical.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darting;
pub mod error;
pub mod grasp;
pub mod harness;
pub mod kameleon;
pub mod learning;
pub mod parallel;
pub mod sampling;
pub mod target;

pub use error::{Error, Result};

/// Random number generator used by the experiment harness.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Version string recorded in result documents.
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");
