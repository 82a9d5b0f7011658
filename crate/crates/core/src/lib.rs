//! Flux-noise spectra of superconducting devices from independent
//! impurity-spin relaxation.
//!
//! Each spin relaxes through field-independent cross relaxation with a
//! broad distribution of rates plus a field-dependent direct process. At
//! zero field the distribution produces `1/ω` noise; a field makes the
//! direct process dominate and the noise collapses to a single Lorentzian.
//!
//! Modules, bottom up:
//!
//! - [`spin`]: single-spin susceptibilities, rates and spectra
//! - [`disorder`]: averages over the rate distribution, with oracles
//! - [`flux`]: flux-vector ensembles, device flux noise and band power
//! - [`bloch`]: equation-of-motion oracle via linear response and the FDT
//! - [`fit`]: log-space multi-start fits with exponent selection
//! - [`config`], [`sweep`], [`output`], [`commands`]: the command-line layer
//!
//! All numerics use reduced units; see [`units`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod commands;
pub mod config;
pub mod disorder;
pub mod error;
pub mod fit;
pub mod flux;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod simplex;
pub mod spectrum;
pub mod spin;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use spectrum::{Channel, Spectrum};
pub use spin::{RateModel, SpinEnvironment, TransversePolicy};
