//! Synthetic class/subclass benchmarks for studying late generalization.
//!
//! - [`classgen`]: binary-coded Gaussian class families.
//! - [`topology`]: Hamming distance graphs, constant-distance cliques and the
//!   equidistant / equivariant dataset layouts.
//! - [`sampler`]: imbalanced subclass subsampling and balanced test sets.
//! - [`nn`]: a from-scratch MLP trainer with decoupled weight decay.
//! - [`grokdetect`]: threshold-based detection of delayed generalization.

pub mod classgen;
pub mod error;
pub mod grokdetect;
pub mod nn;
pub mod sampler;
pub mod seed;
pub mod topology;

pub use error::{Error, Result};
