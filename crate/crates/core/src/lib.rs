//! Rates, precoders and capacity bounds for eigen-direction-alignment
//! physical-layer network coding (EDA-PNC) over MIMO two-way relay channels.
//!
//! All rates are in bits per channel use (base-2 logarithms), normalized by
//! the duration of one phase. Unless stated otherwise every noise variance is
//! one; [`channel::PowerConfig::whiten`] folds other variances into the
//! channel matrices.
//!
//! Module map:
//! - [`channel`]: channel realizations, real/complex handling, SNR bookkeeping.
//! - [`capacity`]: cut-set upper bound and covariance optimization.
//! - [`eda`]: naive and rotated EDA precoders and the achievable-rate formulas.
//! - [`optimizers`]: weighted sum-rate solvers for the uplink precoder.
//! - [`benchmarks`]: DF-NC and naive EDA comparison schemes, rate regions.

pub mod benchmarks;
pub mod capacity;
pub mod channel;
pub mod eda;
mod error;
pub mod linalg;
pub mod optimizers;
mod solver;

pub use error::{Error, Result};
