//! Graph-learning benchmark toolkit for cancer-type classification from
//! joint phenotype and genetic-report features.
//!
//! The pipeline: [`ingest`] reads (or synthesizes) a cohort and builds the
//! filtered feature vocabulary, [`graph`] turns it into a phenotype–gene
//! feature graph with patient nodes, [`gnn`] trains the eight graph operators
//! on top of [`autodiff`], [`baselines`] trains the five classical models on
//! the patients' multi-hot vectors, and [`eval`] scores everything. [`bench`]
//! ties the stages together for the command-line tool.

pub mod autodiff;
pub mod baselines;
pub mod bench;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod ingest;
pub(crate) mod util;

pub use error::{Error, Result};

/// Number of cancer classes in the cohort.
pub const NUM_CLASSES: usize = 7;
