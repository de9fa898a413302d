//! Projected gradient ascent for weighted sums of log-determinants under a
//! joint trace budget. Backs the relay covariance and the DF-NC uplink.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::linalg::{log2_det_spd, project_psd_budget};

pub const PG_TOLERANCE: f64 = 1e-8;
pub const PG_MAX_ITERATIONS: usize = 10_000;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// `weight · ½ log₂ det(I + Σ_k H_k Q_{b_k} H_kᵀ)`.
pub(crate) struct LogDetTerm<'a> {
    pub weight: f64,
    pub channels: Vec<(usize, &'a DMatrix<f64>)>,
}

pub(crate) struct LogDetProblem<'a> {
    pub terms: Vec<LogDetTerm<'a>>,
    pub block_dims: Vec<usize>,
    pub budget: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

impl<'a> LogDetProblem<'a> {
    fn gram(&self, term: &LogDetTerm<'_>, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
        let rows = term.channels[0].1.nrows();
        let mut m = DMatrix::identity(rows, rows);
        for &(b, h) in &term.channels {
            m += h * &blocks[b] * h.transpose();
        }
        m
    }

    pub fn objective(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.weight != 0.0)
            .map(|t| match log2_det_spd(&self.gram(t, blocks)) {
                Some(v) => 0.5 * t.weight * v,
                None => f64::NEG_INFINITY,
            })
            .sum()
    }

    fn gradient(&self, blocks: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let mut grad: Vec<DMatrix<f64>> = self
            .block_dims
            .iter()
            .map(|&n| DMatrix::zeros(n, n))
            .collect();
        for t in self.terms.iter().filter(|t| t.weight != 0.0) {
            let Some(inv) = self.gram(t, blocks).cholesky().map(|c| c.inverse()) else {
                continue;
            };
            let scale = t.weight / (2.0 * LN_2);
            for &(b, h) in &t.channels {
                grad[b] += (h.transpose() * &inv * h) * scale;
            }
        }
        grad
    }

    pub fn uniform_start(&self) -> Vec<DMatrix<f64>> {
        let total: usize = self.block_dims.iter().sum();
        let each = self.budget / total as f64;
        self.block_dims
            .iter()
            .map(|&n| DMatrix::identity(n, n) * each)
            .collect()
    }

    pub fn solve(&self, start: Vec<DMatrix<f64>>) -> (Vec<DMatrix<f64>>, SolverReport) {
        let mut q = project_psd_budget(&start, self.budget);
        let mut f = self.objective(&q);
        let mut history = vec![f];
        let mut step = {
            let g = self.gradient(&q);
            let norm = g.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
            if norm > 0.0 {
                self.budget / norm
            } else {
                1.0
            }
        };
        let mut converged = false;
        let mut iterations = 0;

        while iterations < PG_MAX_ITERATIONS {
            iterations += 1;
            let g = self.gradient(&q);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let moved: Vec<DMatrix<f64>> =
                    q.iter().zip(&g).map(|(qb, gb)| qb + gb * step).collect();
                let cand = project_psd_budget(&moved, self.budget);
                let fc = self.objective(&cand);
                let ascent: f64 = g
                    .iter()
                    .zip(cand.iter().zip(&q))
                    .map(|(gb, (cb, qb))| gb.dot(&(cb - qb)))
                    .sum();
                if fc >= f && fc >= f + ARMIJO * ascent {
                    accepted = Some((cand, fc));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc)) = accepted else {
                // No step length improves the objective: stationary to
                // working precision.
                converged = true;
                break;
            };
            let gain = fc - f;
            q = cand;
            f = fc;
            history.push(f);
            step *= 2.0;
            if gain < PG_TOLERANCE {
                converged = true;
                break;
            }
        }

        let report = SolverReport {
            objective: f,
            iterations,
            converged,
            history,
        };
        (q, report)
    }
}
