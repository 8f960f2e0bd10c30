//! EEG relevance feedback for image retrieval.
//!
//! The crate simulates oddball RSVP sessions, turns the recordings into
//! P300 feature vectors, scores them with a linear SVM and builds rankings
//! from those scores or from mouse annotations. Rankings can then seed a
//! relevance-feedback SVM over a larger descriptor collection.
//!
//! Module map:
//! - [`dataio`]: domain types and file formats
//! - [`pipeline`] and [`filter`]: preprocessing and feature extraction
//! - [`synth`]: synthetic recordings
//! - [`planner`]: presentation plans and timing
//! - [`svm`]: linear SVM
//! - [`metrics`]: AUC, AP, Welch t-test
//! - [`retrieval`]: rankings and relevance feedback
//! - [`fixtures`]: synthetic images and descriptor sets
//! - [`experiment`]: end-to-end harnesses over simulated users

pub mod dataio;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod planner;
pub mod retrieval;
pub mod svm;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
