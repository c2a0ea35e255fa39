//! Randomized Chebyshev estimation of smoothed spectral densities for
//! implicit, possibly noisy, symmetric operators.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bessel;
pub mod chebyshev;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod pipeline;
pub mod proposal;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod trace;
pub mod vonmises;

pub use error::{Error, Result};
