//! Simulation and verification lab for local differential privacy on
//! collaborative-filtering sketches.
//!
//! The crate models a bipartite blockmodel of users and items, releases one
//! privatized bit per user query (randomized response), recovers item
//! clusters from the aggregated sketches, and cross-checks the construction
//! against exact information-theoretic oracles on small instances.
//!
//! Module map:
//! - [`model`]: blockmodel parameters, ground truth, user sampling, dataset files
//! - [`privacy`]: the bit-release mechanism, budget accounting, kernel DP verifier
//! - [`kernel`]: finite release channels over user data, CSV serialization
//! - [`pairwise`]: pair-agreement sketches and spectral item clustering
//! - [`maxsense`]: disjunction sketches over random sensing vectors, count clustering
//! - [`clustering`]: k-means, exact 1-D k-means, permutation-invariant label matching
//! - [`bounds`]: exact mutual-information oracles and lower-bound calculators
//! - [`harness`]: trials, success rates, threshold search, scaling fits, baselines
//! - [`cli`]: the `ldp-lab` command-line tool
//!
//! All randomness flows from one master seed through named substreams (see
//! [`rng`]), so every result is reproducible bit-for-bit for any thread count.
//! Items, users, and classes are 0-indexed in the API and 1-indexed in every
//! external file format.

pub mod bounds;
pub mod cli;
pub mod clustering;
pub mod harness;
pub mod kernel;
pub mod maxsense;
pub mod model;
pub mod pairwise;
pub mod privacy;
pub mod rng;

pub use kernel::{ChannelKernel, UserDatum};
pub use model::{GroundTruth, ModelParams, UserRecord};
