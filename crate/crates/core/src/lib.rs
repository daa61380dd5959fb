//! Learning multiclass linear classifiers from samples corrupted by a nasty
//! adversary.
//!
//! The pipeline: generate a margin-separated mixture ([`data_gen`]), let an
//! adversary replace a fraction of the sample ([`adversary`]), prune it with
//! robust clustering ([`cluster`]) and per-cluster majority labels, then
//! minimize the multiclass hinge loss over the unit ball ([`learner`]).
//! [`harness`] runs seeded trials and writes CSV reports.

pub mod adversary;
pub mod cluster;
pub mod data_gen;
pub mod error;
pub mod harness;
pub mod io;
pub mod learner;
pub mod linalg;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{LabeledPoint, LabeledSet, WeightMatrix};
