//! Frequency-domain explanations for time-series classifiers.
//!
//! A filterbank splits a signal into equal-width frequency bands and a sparse
//! band mask is learned so that the masked reconstruction keeps a classifier's
//! prediction. The crate also carries the baselines, the synthetic
//! ground-truthed benchmark, a small 1-D CNN to explain, and evaluation
//! metrics.

pub mod container;
pub mod conv;
pub mod error;
pub mod explain;
pub mod filterbank;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod synthdata;
pub mod voigt;

pub use error::{Error, Result};
