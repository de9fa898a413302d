#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random PSD matrix with trace `trace` (rank `n`).
pub fn psd(rng: &mut impl Rng, n: usize, trace: f64) -> DMatrix<f64> {
    let a = gaussian(rng, n, n);
    let m = &a * a.transpose();
    let t = m.trace();
    m * (trace / t)
}

/// Random orthogonal matrix (QR of a Gaussian matrix, signs fixed).
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `log2 det` through an LU factorization.
pub fn log2_det_lu(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().log2()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues_ascending(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rate of the 2x2 covariance `R(φ) diag(p, P−p) R(φ)ᵀ`, written out.
pub fn rate_2x2(h: &DMatrix<f64>, phi: f64, p: f64, total: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let (a, b) = (p, total - p);
    let q = [
        c * c * a + s * s * b,
        c * s * (a - b),
        s * s * a + c * c * b,
    ];
    let hq = |i: usize| {
        let (x, y) = (h[(i, 0)], h[(i, 1)]);
        (x * q[0] + y * q[1], x * q[1] + y * q[2])
    };
    let (r0, r1) = (hq(0), hq(1));
    let m00 = 1.0 + r0.0 * h[(0, 0)] + r0.1 * h[(0, 1)];
    let m01 = r0.0 * h[(1, 0)] + r0.1 * h[(1, 1)];
    let m11 = 1.0 + r1.0 * h[(1, 0)] + r1.1 * h[(1, 1)];
    0.5 * (m00 * m11 - m01 * m01).log2()
}

/// Best rate over a 360 x 400 grid of 2x2 covariances with trace `total`,
/// and the grid winner after a shrinking pattern search.
pub fn grid_oracle_2x2(h: &DMatrix<f64>, total: f64) -> (f64, f64) {
    let (na, np) = (360, 400);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..na {
        let phi = std::f64::consts::PI * i as f64 / na as f64;
        for j in 0..=np {
            let p = total * j as f64 / np as f64;
            let v = rate_2x2(h, phi, p, total);
            if v > best.0 {
                best = (v, phi, p);
            }
        }
    }
    let (mut v, mut phi, mut p) = best;
    let (mut dphi, mut dp) = (std::f64::consts::PI / na as f64, total / np as f64);
    for _ in 0..60 {
        let mut moved = false;
        for (a, b) in [(dphi, 0.0), (-dphi, 0.0), (0.0, dp), (0.0, -dp)] {
            let (pp, qq) = (phi + a, (p + b).clamp(0.0, total));
            let w = rate_2x2(h, pp, qq, total);
            if w > v {
                (v, phi, p, moved) = (w, pp, qq, true);
            }
        }
        if !moved {
            dphi *= 0.5;
            dp *= 0.5;
        }
    }
    (best.0, v)
}
