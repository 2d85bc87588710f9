//! One-class fraud detection toolkit.
//!
//! The library trains a support vector data description (SVDD) on
//! target-class data only, shrinks large target-class training sets with a
//! density-based representative selection (REDBSCAN), tunes hyperparameters
//! with a genetic algorithm, and compares the result against a two-class SVM
//! baseline on a shared test partition.
//!
//! Modules roughly follow the processing order of the end-to-end pipeline:
//!
//! * [`dataio`] — table ingestion, column-max normalization, protocol splits
//!   and synthetic dataset generators.
//! * [`kernel`] — Euclidean distances, RBF/linear kernel evaluation and Gram
//!   matrices shared by all solvers.
//! * [`redbscan`] — density-weighted representative selection that reduces a
//!   dataset while keeping its boundary shape.
//! * [`svdd`] — minimum enclosing hypersphere training and scoring.
//! * [`svm`] — soft-margin two-class SVM baseline with k-fold cross
//!   validation.
//! * [`tuner`] — seeded real-valued genetic algorithm for hyperparameter
//!   search.
//! * [`eval`] — confusion metrics, ROC/AUC and wall-clock timing.
//! * [`model_io`] — versioned flat-text model serialization.
//! * [`pipeline`] — config-driven orchestration of all stages.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model_io;
pub mod pipeline;
pub mod redbscan;
pub mod svdd;
pub mod svm;
pub mod tuner;

pub use error::{Error, Result};
