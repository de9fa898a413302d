use nalgebra::DVector;

use crate::{Error, Result};

/// Subset of stream indices (at most 64 streams).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSet(u64);

impl StreamSet {
    pub fn empty() -> Self {
        StreamSet(0)
    }

    pub fn all(n: usize) -> Self {
        assert!(n <= 64);
        StreamSet(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn from_bits(bits: u64) -> Self {
        StreamSet(bits)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        StreamSet(indices.iter().fold(0, |acc, &i| acc | (1u64 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn bits(self) -> u64 {
        self.0
    }
}

/// Amplitudes `Σ` for `Ψ_A = Σ`, `Ψ_B = γΣ`.
#[derive(Debug, Clone)]
pub struct SigmaSolution {
    pub sigma: DVector<f64>,
    /// Water level `1/(2λ)`.
    pub level: f64,
    /// Set when no stream has a positive weight, so the budget cannot be
    /// spent and `Σ = 0` is returned.
    pub infeasible: bool,
}

/// Per-stream weight: 1 on both sets, `α` on `S_A` only, `1−α` on `S_B`
/// only, 0 otherwise.
pub(crate) fn stream_weight(i: usize, alpha: f64, s_a: StreamSet, s_b: StreamSet) -> f64 {
    match (s_a.contains(i), s_b.contains(i)) {
        (true, true) => 1.0,
        (true, false) => alpha,
        (false, true) => 1.0 - alpha,
        (false, false) => 0.0,
    }
}

/// Water-filling over streams with costs `lambda_g`:
/// `Σᵢ² = (wᵢ·L/Λᵢ − 1/(1+γ²))⁺` with `L` chosen so that
/// `Σᵢ ΛᵢΣᵢ² = p_t`.
pub fn waterfill_sigma(
    lambda_g: &DVector<f64>,
    gamma: f64,
    alpha: f64,
    p_t: f64,
    s_a: StreamSet,
    s_b: StreamSet,
) -> Result<SigmaSolution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "weight alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::Domain(format!("p_t must be positive, got {p_t}")));
    }
    if lambda_g.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Domain("stream costs must be positive".into()));
    }
    let n = lambda_g.len();
    let c = 1.0 / (1.0 + gamma * gamma);
    let w: Vec<f64> = (0..n).map(|i| stream_weight(i, alpha, s_a, s_b)).collect();
    let spend = |level: f64| -> f64 {
        (0..n)
            .map(|i| (w[i] * level - c * lambda_g[i]).max(0.0))
            .sum()
    };
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(SigmaSolution {
            sigma: DVector::zeros(n),
            level: 0.0,
            infeasible: true,
        });
    }
    let min_w = active.iter().map(|&i| w[i]).fold(f64::INFINITY, f64::min);
    let floor: f64 = active.iter().map(|&i| c * lambda_g[i]).sum();
    let (mut lo, mut hi) = (0.0, (p_t + floor) / min_w);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid) > p_t {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let level = 0.5 * (lo + hi);
    let sigma = DVector::from_fn(n, |i, _| ((w[i] * level / lambda_g[i] - c).max(0.0)).sqrt());
    Ok(SigmaSolution {
        sigma,
        level,
        infeasible: false,
    })
}
