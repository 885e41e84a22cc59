//! Multimorbidity affinity analysis for areal units: per-tract condition
//! co-occurrence scores, spatial weights, global and local spatial
//! autocorrelation, robust regression on neighbourhood indicators, and
//! synthetic lattice regions for validation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affinity;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod regression;
pub mod rng;
pub mod spatial;
pub mod stats;
pub mod synth;
pub mod vars;
pub mod weights;

pub use error::{Error, ErrorClass, Result};
