//! Fine-tuning of perceptual-distance layer weights against human rankings,
//! and the statistics used to judge how well a metric's rankings agree with
//! a human's.
//!
//! The pipeline:
//!
//! 1. [`distx`] reads per-pair feature-difference tensors produced by an
//!    external extractor (or by [`synth`]).
//! 2. [`dataset`] loads human rankings, expands them into pairwise tuples and
//!    splits sets into training and validation partitions.
//! 3. [`train`] fits the non-negative weights of a [`model::WeightHead`] with a
//!    margin ranking loss and projected Adam.
//! 4. [`stats`] reports Spearman's rho and ICC(2,k) between metric and human
//!    ranks; [`boot`] compares two heads with a paired bootstrap over sets.

pub mod boot;
pub mod cli;
pub mod dataset;
pub mod distx;
pub mod error;
pub mod model;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
