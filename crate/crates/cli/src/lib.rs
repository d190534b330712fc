//! Command-line front end: covariance estimation, detection and scenario
//! simulation over plain-text sample and matrix files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod formats;
