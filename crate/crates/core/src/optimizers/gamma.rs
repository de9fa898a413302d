use nalgebra::{DMatrix, DVector};

use crate::linalg::{gram_inverse, sym_eigen_ascending};
use crate::{Error, Result};

/// Inverse Gram matrices `(H_A H_Aᵀ)⁻¹` and `(H_B H_Bᵀ)⁻¹` of the uplink.
#[derive(Debug, Clone)]
pub struct ChannelGrams {
    pub inv_a: DMatrix<f64>,
    pub inv_b: DMatrix<f64>,
}

impl ChannelGrams {
    pub fn new(h_ar: &DMatrix<f64>, h_br: &DMatrix<f64>) -> Result<Self> {
        if h_ar.nrows() != h_br.nrows() {
            return Err(Error::Dimension(
                "uplink channels have different row counts".into(),
            ));
        }
        Ok(ChannelGrams {
            inv_a: gram_inverse(h_ar)?,
            inv_b: gram_inverse(h_br)?,
        })
    }

    pub fn n_r(&self) -> usize {
        self.inv_a.nrows()
    }

    /// `G(γ) = (H_A H_Aᵀ)⁻¹ + γ²(H_B H_Bᵀ)⁻¹`.
    pub fn g(&self, gamma: f64) -> DMatrix<f64> {
        &self.inv_a + &self.inv_b * (gamma * gamma)
    }

    pub fn decompose(&self, gamma: f64) -> GammaDecomposition {
        let eig = sym_eigen_ascending(&self.g(gamma));
        GammaDecomposition {
            gamma,
            u_g: eig.vectors,
            lambda_g: eig.values,
        }
    }

    /// Per-stream power costs `[KᵀGₘK]ᵢᵢ` for both users.
    pub fn costs(&self, k: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            crate::eda::stream_costs(&self.inv_a, k),
            crate::eda::stream_costs(&self.inv_b, k),
        )
    }
}

/// Eigendecomposition `G(γ) = U_G diag(Λ_G) U_Gᵀ` with ascending `Λ_G`.
#[derive(Debug, Clone)]
pub struct GammaDecomposition {
    pub gamma: f64,
    pub u_g: DMatrix<f64>,
    pub lambda_g: DVector<f64>,
}

impl GammaDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u_g * DMatrix::from_diagonal(&self.lambda_g) * self.u_g.transpose()
    }
}

pub fn build_g(h_ar: &DMatrix<f64>, h_br: &DMatrix<f64>, gamma: f64) -> Result<GammaDecomposition> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    Ok(ChannelGrams::new(h_ar, h_br)?.decompose(gamma))
}

/// Optimal unitary rotation for `Ψ_B = γΨ_A`: the eigenvectors of `G(γ)`,
/// pairing the cheapest direction with the strongest stream.
pub fn k_opt_unitary(gd: &GammaDecomposition) -> DMatrix<f64> {
    gd.u_g.clone()
}

/// Search grid `{δ, 2δ, …, 1} ∪ {1/(1−δ), 1/(1−2δ), …}`, ascending. The
/// endpoints 0 and ∞ are left out; `1` is always included.
pub fn gamma_grid(delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!(
            "grid step must lie in (0, 1], got {delta}"
        )));
    }
    let steps = (1.0 / delta + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=steps).map(|k| k as f64 * delta).collect();
    grid.push(1.0);
    for k in 1..=steps {
        let rest = 1.0 - k as f64 * delta;
        if rest > 1e-9 {
            grid.push(1.0 / rest);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(grid)
}
