//! Grid search over the full feasible set for two relay antennas.
//!
//! The rows of `K⁻¹` are unit vectors at angles `θ₁`, `θ₂`, which covers
//! every rotation satisfying the unit-noise constraint in two dimensions.
//! Rows are defined up to sign and the two streams can be swapped, so
//! `0 ≤ θ₁ < θ₂ < π` suffices. Powers are put on the budget surface: a split
//! `t` of the budget between the streams and, per stream, the share `xᵢ` of
//! that stream's budget spent by user A.
//!
//! A coarse grid picks the best few local maxima over the angles. The best
//! eigen-rotations of `G(γ)` join them as extra starts. Each start is
//! refined on a finer grid and then polished by a compass search in all
//! five parameters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::gamma::{gamma_grid, ChannelGrams};
use super::{Method, WsrSolution};
use crate::eda::PrecoderConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Angle grid points over `[0, π)`.
    pub angle_steps: usize,
    /// Steps over `[0, 1]` for the stream split and each user share.
    pub power_steps: usize,
    /// Resolution multiplier of the refinement pass.
    pub refine_factor: usize,
    /// Coarse cells carried into refinement.
    pub refine_cells: usize,
    /// Finish with a compass search from each refined incumbent.
    pub polish: bool,
    /// Restrict `K` to orthogonal matrices (`θ₂ = θ₁ + π/2`).
    pub unitary_only: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            angle_steps: 64,
            power_steps: 16,
            refine_factor: 4,
            refine_cells: 8,
            polish: true,
            unitary_only: false,
        }
    }
}

impl GridSpec {
    /// Same search with every resolution doubled.
    pub fn doubled(&self) -> Self {
        GridSpec {
            angle_steps: 2 * self.angle_steps,
            power_steps: 2 * self.power_steps,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.angle_steps < 2 || self.power_steps < 1 || self.refine_factor < 1 {
            return Err(Error::Domain(format!("degenerate grid {self:?}")));
        }
        if self.unitary_only && self.angle_steps % 2 != 0 {
            return Err(Error::Domain(
                "unitary-only search needs an even angle count".into(),
            ));
        }
        Ok(())
    }
}

/// `½[log₂(a/(a+b) + a)]⁺` on squared amplitudes.
fn rate_sq(a: f64, b: f64) -> f64 {
    let total = a + b;
    if total <= 0.0 {
        return 0.0;
    }
    let arg = a / total + a;
    if arg <= 1.0 {
        0.0
    } else {
        0.5 * arg.log2()
    }
}

/// `nᵀMn` with `n = (sin θ, −cos θ)`: the cost of the `K` column orthogonal
/// to the `K⁻¹` row at angle `θ`, before dividing by `sin²(θ₂ − θ₁)`.
fn normal_cost(m: &DMatrix<f64>, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    s * s * m[(0, 0)] - 2.0 * s * c * m[(0, 1)] + c * c * m[(1, 1)]
}

struct Search<'a> {
    grams: &'a ChannelGrams,
    p_t: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    theta: [f64; 2],
    t: f64,
    x: [f64; 2],
    value: f64,
}

impl Search<'_> {
    /// Power costs `(c_A, c_B)` of both streams, or `None` for (nearly)
    /// parallel rows.
    fn costs(&self, theta: [f64; 2]) -> Option<[(f64, f64); 2]> {
        let s = (theta[1] - theta[0]).sin();
        let s2 = s * s;
        if s2 < 1e-12 {
            return None;
        }
        let g = self.grams;
        // Column 1 of K is orthogonal to row 2 of K⁻¹ and vice versa.
        Some([
            (
                normal_cost(&g.inv_a, theta[1]) / s2,
                normal_cost(&g.inv_b, theta[1]) / s2,
            ),
            (
                normal_cost(&g.inv_a, theta[0]) / s2,
                normal_cost(&g.inv_b, theta[0]) / s2,
            ),
        ])
    }

    fn stream_value(&self, cost: (f64, f64), power: f64, x: f64) -> f64 {
        let a = x * power / cost.0;
        let b = (1.0 - x) * power / cost.1;
        self.alpha * rate_sq(a, b) + (1.0 - self.alpha) * rate_sq(b, a)
    }

    fn value(&self, theta: [f64; 2], t: f64, x: [f64; 2]) -> f64 {
        let Some(c) = self.costs(theta) else {
            return f64::NEG_INFINITY;
        };
        self.stream_value(c[0], t * self.p_t, x[0])
            + self.stream_value(c[1], (1.0 - t) * self.p_t, x[1])
    }

    /// Best powers for fixed angles over the given `t` and `x` candidates.
    /// The streams separate once `t` is fixed.
    fn best_powers(&self, theta: [f64; 2], ts: &[f64], xs: [&[f64]; 2]) -> Option<Point> {
        let c = self.costs(theta)?;
        let mut best: Option<Point> = None;
        for &t in ts {
            let mut x = [0.0; 2];
            let mut value = 0.0;
            for i in 0..2 {
                let power = if i == 0 { t } else { 1.0 - t } * self.p_t;
                let (mut bx, mut bv) = (xs[i][0], f64::NEG_INFINITY);
                for &cand in xs[i] {
                    let v = self.stream_value(c[i], power, cand);
                    if v > bv {
                        bx = cand;
                        bv = v;
                    }
                }
                x[i] = bx;
                value += bv;
            }
            if best.is_none_or(|b| value > b.value) {
                best = Some(Point { theta, t, x, value });
            }
        }
        best
    }

    /// Compass search from `start`. A move in `t` re-picks both shares from
    /// `shares` and their current values: a stream with no power has a flat
    /// share, and moving `t` alone would never switch it on.
    fn polish(
        &self,
        start: Point,
        angle_step: f64,
        power_step: f64,
        shares: &[f64],
        unitary: bool,
    ) -> Point {
        let mut p = start;
        let mut steps = [angle_step, power_step];
        let mut evaluations = 0;
        while (steps[0] > 1e-10 || steps[1] > 1e-10) && evaluations < 4000 {
            let mut improved = false;
            for dim in 0..5 {
                if unitary && dim == 1 {
                    continue;
                }
                for dir in [1.0, -1.0] {
                    let mut q = p;
                    match dim {
                        0 => {
                            q.theta[0] += dir * steps[0];
                            if unitary {
                                q.theta[1] = q.theta[0] + PI / 2.0;
                            }
                        }
                        1 => q.theta[1] += dir * steps[0],
                        2 => {
                            let t = (q.t + dir * steps[1]).clamp(0.0, 1.0);
                            let mut x0 = shares.to_vec();
                            x0.push(q.x[0]);
                            let mut x1 = shares.to_vec();
                            x1.push(q.x[1]);
                            if let Some(best) = self.best_powers(q.theta, &[t], [&x0, &x1]) {
                                q = best;
                            }
                        }
                        d => q.x[d - 3] = (q.x[d - 3] + dir * steps[1]).clamp(0.0, 1.0),
                    }
                    q.value = self.value(q.theta, q.t, q.x);
                    evaluations += 1;
                    if q.value > p.value {
                        p = q;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                steps[0] *= 0.5;
                steps[1] *= 0.5;
            }
        }
        p
    }

    fn configuration(&self, p: &Point) -> Result<PrecoderConfig> {
        let c = self
            .costs(p.theta)
            .ok_or_else(|| Error::Singular("search ended on parallel rotation rows".into()))?;
        let (s1, c1) = p.theta[0].sin_cos();
        let (s2, c2) = p.theta[1].sin_cos();
        let k_inv = DMatrix::from_row_slice(2, 2, &[c1, s1, c2, s2]);
        let k = k_inv
            .try_inverse()
            .ok_or_else(|| Error::Singular("rotation is singular".into()))?;
        let powers = [p.t * self.p_t, (1.0 - p.t) * self.p_t];
        let psi_a = DVector::from_fn(2, |i, _| (p.x[i] * powers[i] / c[i].0).sqrt());
        let psi_b = DVector::from_fn(2, |i, _| ((1.0 - p.x[i]) * powers[i] / c[i].1).sqrt());
        Ok(PrecoderConfig {
            k,
            psi_a,
            psi_b,
            gamma: None,
        })
    }
}

fn linspace_around(center: f64, half_width: f64, points_each_side: usize, clamp: bool) -> Vec<f64> {
    let n = points_each_side as isize;
    let step = half_width / points_each_side as f64;
    let mut out: Vec<f64> = (-n..=n)
        .map(|k| center + k as f64 * step)
        .map(|v| if clamp { v.clamp(0.0, 1.0) } else { v })
        .collect();
    out.dedup();
    out
}

/// Eigen-rotation starts added to the grid cells.
const EIGEN_STARTS: usize = 4;

/// Best unitary rotations `K = U_G(γ)` over the γ grid, as search starts.
/// With an ill-conditioned channel the good angles form a peak far narrower
/// than any uniform grid step; these directions sit on it.
fn eigen_starts(search: &Search, coarse: &[f64], count: usize) -> Result<Vec<Point>> {
    let mut starts: Vec<Point> = Vec::new();
    for gamma in gamma_grid(0.02)? {
        let u = search.grams.decompose(gamma).u_g;
        let a = u[(1, 0)].atan2(u[(0, 0)]).rem_euclid(PI / 2.0);
        if let Some(p) = search.best_powers([a, a + PI / 2.0], coarse, [coarse, coarse]) {
            starts.push(p);
        }
    }
    starts.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut chosen: Vec<Point> = Vec::with_capacity(count);
    for p in starts {
        if chosen.len() == count {
            break;
        }
        if chosen
            .iter()
            .all(|c| (c.theta[0] - p.theta[0]).abs() > 1e-9)
        {
            chosen.push(p);
        }
    }
    Ok(chosen)
}

/// Coarse cells to refine: the best local maxima of the angle grid, so that
/// separate basins each get a start, topped up with the best remaining
/// cells. A broad ridge would otherwise fill every slot.
fn starting_cells(
    pairs: &[(usize, usize)],
    points: &[Option<Point>],
    n: usize,
    count: usize,
) -> Vec<Point> {
    let mut index = vec![usize::MAX; n * n];
    for (k, &(j, l)) in pairs.iter().enumerate() {
        index[j * n + l] = k;
    }
    let value = |k: usize| points[k].map_or(f64::NEG_INFINITY, |p| p.value);
    // Strict order with the pair index as tie-break, so plateaus give one
    // maximum.
    let beats = |a: usize, b: usize| value(a) > value(b) || (value(a) == value(b) && a < b);
    let mut peaks = Vec::new();
    let mut rest = Vec::new();
    for (k, &(j, l)) in pairs.iter().enumerate() {
        if points[k].is_none() {
            continue;
        }
        let mut peak = true;
        for dj in -1isize..=1 {
            for dl in -1isize..=1 {
                let (jj, ll) = (j as isize + dj, l as isize + dl);
                if (dj, dl) == (0, 0) || jj < 0 || ll < 0 || jj >= n as isize || ll >= n as isize {
                    continue;
                }
                let other = index[jj as usize * n + ll as usize];
                if other != usize::MAX && beats(other, k) {
                    peak = false;
                }
            }
        }
        if peak {
            peaks.push(k);
        } else {
            rest.push(k);
        }
    }
    let order =
        |v: &mut Vec<usize>| v.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));
    order(&mut peaks);
    order(&mut rest);
    peaks
        .into_iter()
        .chain(rest)
        .take(count)
        .filter_map(|k| points[k])
        .collect()
}

/// Best uplink configuration for two relay antennas by grid search plus
/// local refinement.
pub fn exhaustive_search_2d(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    p_t: f64,
    alpha: f64,
    grid: &GridSpec,
) -> Result<WsrSolution> {
    if h_ar.nrows() != 2 || h_br.nrows() != 2 {
        return Err(Error::Unsupported(format!(
            "exhaustive search needs two relay antennas, got {}",
            h_ar.nrows()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "weight alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::Domain(format!("p_t must be positive, got {p_t}")));
    }
    grid.validate()?;
    let grams = ChannelGrams::new(h_ar, h_br)?;
    let search = Search {
        grams: &grams,
        p_t,
        alpha,
    };

    let n = grid.angle_steps;
    let m = grid.power_steps;
    let angle_step = PI / n as f64;
    let power_step = 1.0 / m as f64;
    let coarse: Vec<f64> = (0..=m).map(|k| k as f64 * power_step).collect();

    let pairs: Vec<(usize, usize)> = if grid.unitary_only {
        (0..n / 2).map(|j| (j, j + n / 2)).collect()
    } else {
        (0..n)
            .flat_map(|j| (j + 1..n).map(move |l| (j, l)))
            .collect()
    };
    let coarse_points: Vec<Option<Point>> = pairs
        .iter()
        .map(|&(j, l)| {
            let theta = [j as f64 * angle_step, l as f64 * angle_step];
            search.best_powers(theta, &coarse, [&coarse, &coarse])
        })
        .collect();
    let mut cells = starting_cells(&pairs, &coarse_points, n, grid.refine_cells.max(1));
    cells.extend(eigen_starts(&search, &coarse, EIGEN_STARTS)?);
    let r = grid.refine_factor;
    let mut best: Option<Point> = None;
    for cell in cells {
        let t1s = linspace_around(cell.theta[0], angle_step, r, false);
        let t2s = if grid.unitary_only {
            Vec::new()
        } else {
            linspace_around(cell.theta[1], angle_step, r, false)
        };
        let ts = linspace_around(cell.t, power_step, r, true);
        let x0 = linspace_around(cell.x[0], power_step, r, true);
        let x1 = linspace_around(cell.x[1], power_step, r, true);
        let mut local = cell;
        for &a in &t1s {
            let seconds: Vec<f64> = if grid.unitary_only {
                vec![a + PI / 2.0]
            } else {
                t2s.clone()
            };
            for b in seconds {
                if let Some(p) = search.best_powers([a, b], &ts, [&x0, &x1]) {
                    if p.value > local.value {
                        local = p;
                    }
                }
            }
        }
        if grid.polish {
            local = search.polish(
                local,
                angle_step / r as f64,
                power_step / r as f64,
                &coarse,
                grid.unitary_only,
            );
        }
        if best.is_none_or(|b| local.value > b.value) {
            best = Some(local);
        }
    }
    let best = best.expect("at least one coarse cell");
    let cfg = search.configuration(&best)?;
    WsrSolution::evaluate(cfg, alpha, Method::Exhaustive)
}
