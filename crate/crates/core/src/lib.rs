//! Generalized zero-shot classification with a frozen attribute output layer
//! and similarity-based soft labels on unseen classes.
//!
//! The pipeline: [`data`] loads or synthesizes attribute matrices and visual
//! features, [`softlabel`] turns attribute similarity into training targets,
//! [`model`] holds the network and its exact gradients, [`train`] runs
//! mini-batch SGD and grid search, and [`eval`] computes seen, unseen and
//! harmonic accuracies and hyperparameter sweeps. [`cli`] wires these into the
//! `zsoftmax` binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod numeric;
pub mod softlabel;
pub mod train;

pub use error::{Error, Result};
