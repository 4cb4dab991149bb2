//! Relation-extraction sentence encoders and the probing tasks used to
//! inspect what their representations encode.
//!
//! The pipeline: load or synthesize an annotated [`corpus::Corpus`], derive
//! the fourteen [`probegen::TaskId`] datasets from its annotations, train an
//! encoder with [`training::train_re`], freeze it, extract representations
//! with [`probing::extract_reps`] and fit logistic-regression probes on them
//! with [`probing::run_suite`].

pub mod corpus;
pub mod deptree;
pub mod encoders;
pub mod probegen;
pub mod probing;
pub mod synth;
pub mod training;
mod error;

pub use error::{Error, Result};
