//! Robust covariance estimation and detection for compound-Gaussian clutter.
//!
//! Samples are complex (or real) vectors stored as columns of a
//! [`SampleSet`]; every matrix estimate is a [`HermitianPD`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
mod error;
pub mod estimators;
pub mod hermitian;
mod sample;
pub mod simkit;
pub mod toeplitz;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use estimators::{estimator_by_name, CovarianceEstimator, Estimate, IterationControl, RadialScore};
pub use hermitian::{HermitianPD, Normalization, C64, CMatrix, CVector};
pub use sample::{Field, SampleSet};
