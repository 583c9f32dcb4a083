//! Tests for equality of means in matched pairs when the second component
//! is missing for part of the subjects.
//!
//! The library computes three quadratic-form statistics (Wald-type,
//! ANOVA-type, modified ANOVA-type) calibrated by a parametric bootstrap,
//! two literature baselines (Little's test and a nonparametric combination
//! of sign and Mann-Whitney statistics), Holm adjustment, and a Monte Carlo
//! driver for type-I error and power studies under MCAR and MAR missingness.

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod rng;
pub mod sample;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use sample::IncompletePairedSample;
pub use stats::{TestKind, TestResult};
