//! Weighted sum-rate solvers for the uplink precoder.
//!
//! The problem is to choose the rotation `K` and amplitudes `Ψ_A`, `Ψ_B`
//! maximizing `α·R_A,UL + (1−α)·R_B,UL` under the transmit power budget.
//! It is not concave; three solvers are provided:
//!
//! - [`approx_solution_1`]: unitary `K = U_G(γ)`, `Ψ_B = γΨ_A`, water-filled
//!   amplitudes, and a one-dimensional search over `γ`.
//! - [`approx_solution_2`]: keeps the rotation of AS-I and refines both
//!   amplitude vectors by alternating concave subproblems.
//! - [`exhaustive_search_2d`]: grid plus local search over every feasible
//!   `(K, Ψ_A, Ψ_B)` for two relay antennas.

mod approx;
mod exhaustive;
mod gamma;
mod waterfill;

use crate::channel::RatePair;
use crate::eda::{uplink_rates, PrecoderConfig};
use crate::Result;

pub use approx::{
    approx_solution_1, approx_solution_1_with, approx_solution_2, approx_solution_2_with,
    As1Options, As2Options, RotationMode,
};
pub use exhaustive::{exhaustive_search_2d, GridSpec};
pub use gamma::{build_g, gamma_grid, k_opt_unitary, ChannelGrams, GammaDecomposition};
pub use waterfill::{waterfill_sigma, SigmaSolution, StreamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exhaustive,
    As1,
    As2,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::As1 => "as1",
            Method::As2 => "as2",
        }
    }
}

/// An uplink configuration together with the rates it achieves.
#[derive(Debug, Clone)]
pub struct WsrSolution {
    pub cfg: PrecoderConfig,
    pub wsr: f64,
    pub rates: RatePair,
    pub method: Method,
}

impl WsrSolution {
    /// Evaluates the true (clipped) uplink rates of `cfg`.
    pub fn evaluate(cfg: PrecoderConfig, alpha: f64, method: Method) -> Result<Self> {
        let rates = uplink_rates(&cfg.psi_a, &cfg.psi_b)?;
        Ok(WsrSolution {
            wsr: rates.weighted(alpha),
            cfg,
            rates,
            method,
        })
    }
}
