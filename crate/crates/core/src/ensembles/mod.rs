//! Validation operators with known spectra.

pub mod analytic;
pub mod combinatorics;
pub mod index;
pub mod kneser;
pub mod random;

pub use analytic::{smoothed_truth, AnalyticSpectrum, ContinuousLaw};
pub use index::{index_formula, ww_index};
pub use kneser::{kneser_operator, kneser_spectrum, KneserGraph, KneserOperator, KneserSpec};
pub use random::{mixture_sample, wigner_sample, wishart_sample, MixtureSpec, WishartSpec};
