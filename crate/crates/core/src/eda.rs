//! Eigen-direction-alignment precoders and their achievable rates.
//!
//! Both users precode so that, after a common rotation `K⁻¹` at the relay,
//! their effective channels become the same set of parallel streams scaled
//! by the diagonal power matrices `Ψ_A`, `Ψ_B`. All formulas assume unit
//! noise; callers with other noise levels whiten the channels first.

use nalgebra::{DMatrix, DVector};

use crate::capacity::mimo_rate;
use crate::channel::{PowerConfig, RatePair, RealChannelSet};
use crate::linalg::{gram_inverse, right_pseudo_inverse};
use crate::{Error, Result};

/// Tolerance on `diag(K⁻¹K⁻ᵀ) = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Relative slack on power budgets, absorbing optimizer rounding.
pub const BUDGET_TOLERANCE: f64 = 1e-6;

/// Rotation matrix and per-stream amplitudes (diagonals of `Ψ_A`, `Ψ_B`).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderConfig {
    pub k: DMatrix<f64>,
    pub psi_a: DVector<f64>,
    pub psi_b: DVector<f64>,
    /// Power-ratio parameter that produced the configuration, if any.
    pub gamma: Option<f64>,
}

impl PrecoderConfig {
    pub fn new(k: DMatrix<f64>, psi_a: DVector<f64>, psi_b: DVector<f64>) -> Result<Self> {
        let cfg = PrecoderConfig {
            k,
            psi_a,
            psi_b,
            gamma: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn n_r(&self) -> usize {
        self.k.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.k.nrows();
        if !self.k.is_square() || self.psi_a.len() != n || self.psi_b.len() != n {
            return Err(Error::Dimension(format!(
                "K is {}x{}, psi_a has {} entries, psi_b has {}",
                self.k.nrows(),
                self.k.ncols(),
                self.psi_a.len(),
                self.psi_b.len()
            )));
        }
        check_amplitudes(&self.psi_a, &self.psi_b)?;
        if !validate_rotation(&self.k) {
            return Err(Error::Constraint(
                "rotation matrix violates diag(K⁻¹K⁻ᵀ) = 1".into(),
            ));
        }
        Ok(())
    }

    /// `Ψ_A` as a dense diagonal matrix.
    pub fn psi_a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.psi_a)
    }

    pub fn psi_b_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.psi_b)
    }
}

fn check_amplitudes(psi_a: &DVector<f64>, psi_b: &DVector<f64>) -> Result<()> {
    if psi_a.len() != psi_b.len() {
        return Err(Error::Dimension(format!(
            "psi_a has {} entries, psi_b has {}",
            psi_a.len(),
            psi_b.len()
        )));
    }
    if psi_a
        .iter()
        .chain(psi_b.iter())
        .any(|&v| !(v >= 0.0 && v.is_finite()))
    {
        return Err(Error::Domain(
            "power amplitudes must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Precoding matrices of both users (each `n_t × n_r`).
#[derive(Debug, Clone)]
pub struct PrecoderMatrices {
    pub f_a: DMatrix<f64>,
    pub f_b: DMatrix<f64>,
}

/// `F = Hᵀ(HHᵀ)⁻¹Ψ`.
pub fn naive_precoder(h: &DMatrix<f64>, psi: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_psi(h, psi)?;
    Ok(right_pseudo_inverse(h)? * DMatrix::from_diagonal(psi))
}

/// `F = Hᵀ(HHᵀ)⁻¹KΨ`.
pub fn eda_precoder(
    h: &DMatrix<f64>,
    k: &DMatrix<f64>,
    psi: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_psi(h, psi)?;
    if k.shape() != (h.nrows(), h.nrows()) {
        return Err(Error::Dimension(format!(
            "K is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            h.nrows(),
            h.nrows()
        )));
    }
    if k.clone().try_inverse().is_none() {
        return Err(Error::Singular("rotation matrix is singular".into()));
    }
    if !validate_rotation(k) {
        return Err(Error::Constraint(
            "rotation matrix violates diag(K⁻¹K⁻ᵀ) = 1".into(),
        ));
    }
    Ok(right_pseudo_inverse(h)? * (k * DMatrix::from_diagonal(psi)))
}

fn check_psi(h: &DMatrix<f64>, psi: &DVector<f64>) -> Result<()> {
    if psi.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "psi has {} entries but H has {} rows",
            psi.len(),
            h.nrows()
        )));
    }
    if psi.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Domain("power amplitudes must be nonnegative".into()));
    }
    Ok(())
}

/// Whether `K` is invertible with every row of `K⁻¹` of unit norm.
pub fn validate_rotation(k: &DMatrix<f64>) -> bool {
    if !k.is_square() || k.nrows() == 0 {
        return false;
    }
    let Some(inv) = k.clone().try_inverse() else {
        return false;
    };
    if !inv.iter().all(|v| v.is_finite()) {
        return false;
    }
    let m = &inv * inv.transpose();
    (0..k.nrows()).all(|i| (m[(i, i)] - 1.0).abs() <= ROTATION_TOLERANCE)
}

/// Rotation matrix whose inverse has the given rows, after normalizing each
/// row to unit length.
pub fn rotation_from_inverse_rows(k_inv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut rows = k_inv.clone();
    for mut row in rows.row_iter_mut() {
        let n = row.norm();
        if n == 0.0 {
            return Err(Error::Singular("zero row in K⁻¹".into()));
        }
        row /= n;
    }
    rows.try_inverse()
        .ok_or_else(|| Error::Singular("K⁻¹ is singular".into()))
}

/// Builds both precoders for a configuration.
pub fn precoders(cs: &RealChannelSet, cfg: &PrecoderConfig) -> Result<PrecoderMatrices> {
    Ok(PrecoderMatrices {
        f_a: eda_precoder(cs.h_ar(), &cfg.k, &cfg.psi_a)?,
        f_b: eda_precoder(cs.h_br(), &cfg.k, &cfg.psi_b)?,
    })
}

/// Largest entry of `|K⁻¹HF − Ψ|`.
pub fn alignment_residual(
    h: &DMatrix<f64>,
    k: &DMatrix<f64>,
    f: &DMatrix<f64>,
    psi: &DVector<f64>,
) -> Result<f64> {
    let inv = k
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("rotation matrix is singular".into()))?;
    Ok((inv * h * f - DMatrix::from_diagonal(psi)).amax())
}

/// Rate of one stream for the user with amplitude `own` when the other user
/// has amplitude `other`: `½[log₂(own²/(own²+other²) + own²)]⁺`, zero when
/// the stream is off.
pub fn stream_rate(own: f64, other: f64) -> f64 {
    let (o2, t2) = (own * own, other * other);
    let total = o2 + t2;
    if total == 0.0 {
        return 0.0;
    }
    let arg = o2 / total + o2;
    if arg <= 1.0 {
        0.0
    } else {
        0.5 * arg.log2()
    }
}

/// Uplink rates of the aligned streams.
pub fn uplink_rates(psi_a: &DVector<f64>, psi_b: &DVector<f64>) -> Result<RatePair> {
    check_amplitudes(psi_a, psi_b)?;
    let mut r = RatePair::ZERO;
    for (&a, &b) in psi_a.iter().zip(psi_b.iter()) {
        r.r_a += stream_rate(a, b);
        r.r_b += stream_rate(b, a);
    }
    Ok(r)
}

/// Downlink caps: user A's message reaches B through `H_RB` and vice versa.
pub fn downlink_rates(
    h_ra: &DMatrix<f64>,
    h_rb: &DMatrix<f64>,
    q_r: &DMatrix<f64>,
) -> Result<RatePair> {
    Ok(RatePair {
        r_a: mimo_rate(h_rb, q_r)?,
        r_b: mimo_rate(h_ra, q_r)?,
    })
}

/// Per-stream power costs `[KᵀGK]ᵢᵢ` for a symmetric `G`.
pub fn stream_costs(g: &DMatrix<f64>, k: &DMatrix<f64>) -> DVector<f64> {
    let m = k.transpose() * g * k;
    m.diagonal()
}

/// `Tr((H_A H_Aᵀ)⁻¹KΨ_A²Kᵀ + (H_B H_Bᵀ)⁻¹KΨ_B²Kᵀ)`.
pub fn transmit_power(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    cfg: &PrecoderConfig,
) -> Result<f64> {
    cfg.validate()?;
    if h_ar.nrows() != cfg.n_r() || h_br.nrows() != cfg.n_r() {
        return Err(Error::Dimension(
            "precoder and channel dimensions disagree".into(),
        ));
    }
    let ca = stream_costs(&gram_inverse(h_ar)?, &cfg.k);
    let cb = stream_costs(&gram_inverse(h_br)?, &cfg.k);
    Ok((0..cfg.n_r())
        .map(|i| cfg.psi_a[i].powi(2) * ca[i] + cfg.psi_b[i].powi(2) * cb[i])
        .sum())
}

/// Rate pair of the scheme: each user's uplink rate capped by its downlink
/// rate. Noise variances in `pc` are folded into the channels.
pub fn achievable_rate_pair(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    cfg: &PrecoderConfig,
    q_r: &DMatrix<f64>,
) -> Result<RatePair> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let used = transmit_power(cs.h_ar(), cs.h_br(), cfg)?;
    if used > pc.p_t * (1.0 + BUDGET_TOLERANCE) {
        return Err(Error::Constraint(format!(
            "precoders use power {used}, budget is {}",
            pc.p_t
        )));
    }
    let relay = q_r.trace();
    if relay > pc.p_r * (1.0 + BUDGET_TOLERANCE) {
        return Err(Error::Constraint(format!(
            "relay covariance has trace {relay}, budget is {}",
            pc.p_r
        )));
    }
    let up = uplink_rates(&cfg.psi_a, &cfg.psi_b)?;
    let down = downlink_rates(cs.h_ra(), cs.h_rb(), q_r)?;
    Ok(up.min(&down))
}
