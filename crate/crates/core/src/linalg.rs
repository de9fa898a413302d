//! Small dense linear-algebra helpers shared by the rate and precoder code.
//!
//! Matrices here are tiny (at most a few dozen rows), so everything works on
//! `nalgebra::DMatrix<f64>` and favours clarity over blocking or reuse of
//! workspaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// A matrix is treated as rank deficient when `σ_min / σ_max` falls below this.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOLERANCE * max(1, ‖M‖)` reject a matrix as not PSD.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Ratio of the smallest to the largest singular value (0 for an all-zero matrix).
pub fn singular_ratio(h: &DMatrix<f64>) -> f64 {
    let sv = h.clone().singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0.0;
    }
    sv.min() / max
}

pub fn has_full_row_rank(h: &DMatrix<f64>) -> bool {
    h.nrows() <= h.ncols() && singular_ratio(h) >= RANK_TOLERANCE
}

/// `(H Hᵀ)⁻¹` for a full-row-rank `H`.
pub fn gram_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !has_full_row_rank(h) {
        return Err(Error::Singular(format!(
            "{}x{} channel is not of full row rank",
            h.nrows(),
            h.ncols()
        )));
    }
    let gram = h * h.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("H Hᵀ is not positive definite".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Moore-Penrose right inverse `Hᵀ (H Hᵀ)⁻¹`.
pub fn right_pseudo_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(h.transpose() * gram_inverse(h)?)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `log₂ det(M)` for a symmetric positive definite `M`; `None` if the
/// Cholesky factorization fails.
pub fn log2_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += l[(i, i)].log2();
    }
    Some(2.0 * acc)
}

/// Symmetric eigendecomposition with ascending eigenvalues.
///
/// Ties keep the solver's original index order. Each eigenvector is signed so
/// that its largest-magnitude component is positive (first such component on
/// ties), which makes the factorization deterministic.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen_ascending(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    SortedEigen { values, vectors }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    min_eigenvalue(m) >= -PSD_TOLERANCE * scale
}

/// Euclidean projection of `values` onto `{x ≥ 0, Σx ≤ budget}`.
pub fn project_capped_simplex(values: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Find τ > 0 with Σ max(v - τ, 0) = budget.
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - budget) / (k + 1) as f64;
        if k + 1 == sorted.len() || sorted[k + 1] <= candidate {
            tau = candidate;
            break;
        }
    }
    values.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Projects a family of symmetric matrices onto the set of PSD matrices whose
/// traces sum to at most `budget`.
pub fn project_psd_budget(blocks: &[DMatrix<f64>], budget: f64) -> Vec<DMatrix<f64>> {
    let eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = blocks
        .iter()
        .map(|b| SymmetricEigen::new(symmetrize(b)))
        .collect();
    let all: Vec<f64> = eigs
        .iter()
        .flat_map(|e| e.eigenvalues.iter().copied())
        .collect();
    let projected = project_capped_simplex(&all, budget);
    let mut offset = 0;
    eigs.into_iter()
        .map(|e| {
            let n = e.eigenvalues.len();
            let vals = DVector::from_column_slice(&projected[offset..offset + n]);
            offset += n;
            let v = &e.eigenvectors;
            symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
        })
        .collect()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
