//! Adaptive detection of subspace signals in homogeneous and
//! partially-homogeneous Gaussian disturbance.
//!
//! The crate provides the data model ([`scenario`]), the first-order GLR
//! statistics ([`glr_fo`]), the eight estimate-and-plug statistics ([`ep`]),
//! a uniform detector interface ([`detector`]) and the Monte Carlo engine used
//! to calibrate thresholds and estimate detection and false-alarm rates
//! ([`montecarlo`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detector;
pub mod ep;
pub mod error;
pub mod glr_fo;
pub mod matcore;
pub mod montecarlo;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
