//! Command-line front end for randomized Chebyshev spectral density estimation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod jobs;
pub mod output;
pub mod settings;
