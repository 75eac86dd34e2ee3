//! Correction of learned Bayesian network structures for measurement error.
//!
//! Structure learners fed with noisy categorical data tend to produce
//! spurious edges that close 3-vertex cliques. This crate detects such
//! cliques and removes edges whose presence is better explained by a hidden
//! error-free parent of a noisy observed variable, comparing BIC scores of
//! reconstructions fitted with EM.
//!
//! The surrounding pipeline is included: forward sampling, a measurement
//! error channel, a hill-climbing learner, and CPDAG evaluation.

pub mod bench;
pub mod data;
pub mod em;
pub mod error;
pub mod eval;
pub mod graph;
pub mod learn;
pub mod model;
pub mod score;
pub mod sed;
pub mod seeds;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
