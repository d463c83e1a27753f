//! Differential entropy of Gaussian-smoothed distributions.
//!
//! The central object is a [`GaussianMixture`]: the convolution of a
//! discrete or empirical measure with an isotropic Gaussian. The crate
//! evaluates its density, estimates its entropy by Monte Carlo, compares
//! smoothed measures under TV, KL, chi-square and Wasserstein distances,
//! evaluates the explicit constants that control their convergence, and
//! measures mutual information in noisy networks and coded AWGN channels.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature spreads the
//! Monte-Carlo loops over a rayon pool without changing any result bit.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

mod error;
mod par;

pub mod bounds;
pub mod channel;
pub mod distances;
pub mod dnn;
pub mod entropy;
pub mod experiments;
pub mod kdtree;
pub mod math;
pub mod mixture;
pub mod rng;

pub use error::{Error, Result};
pub use distances::{DistanceEstimate, DistanceKind, RateFit};
pub use entropy::{EstimateReport, McBudget, MseBoundMode};
pub use mixture::{DiscreteDistribution, GaussianMixture, SampleMatrix};
pub use rng::Stream;
