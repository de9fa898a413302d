//! Cut-set capacity upper bound of the MIMO two-way relay channel together
//! with the covariance optimizations it needs.
//!
//! The uplink weighted problem separates over the right singular vectors of
//! the two channels and is solved exactly by weighted water-filling. The
//! downlink (relay) problem couples both users through one covariance and is
//! solved by projected gradient ascent.

use nalgebra::{DMatrix, DVector};

use crate::channel::{PowerConfig, RatePair, RealChannelSet};
use crate::linalg::{is_psd, log2_det_spd};
use crate::solver::{LogDetProblem, LogDetTerm};
use crate::{Error, Result};

pub use crate::solver::{SolverReport, PG_MAX_ITERATIONS, PG_TOLERANCE};

const BISECTION_STEPS: usize = 200;

/// `½ log₂ det(I + H Q Hᵀ)`.
pub fn mimo_rate(h: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if !q.is_square() || q.nrows() != h.ncols() {
        return Err(Error::Dimension(format!(
            "H is {}x{} but Q is {}x{}",
            h.nrows(),
            h.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_psd(q) {
        return Err(Error::Domain(
            "covariance is not positive semidefinite".into(),
        ));
    }
    let m = DMatrix::identity(h.nrows(), h.nrows()) + h * q * h.transpose();
    let v = log2_det_spd(&m)
        .ok_or_else(|| Error::Domain("I + H Q Hᵀ is not positive definite".into()))?;
    Ok((0.5 * v).max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "weight alpha must lie in [0, 1], got {alpha}"
        )))
    }
}

fn check_budget(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {p}")))
    }
}

/// Solution of `max Σ wᵢ ½log₂(1 + gᵢ pᵢ)` s.t. `Σ pᵢ ≤ budget`.
///
/// `pᵢ = (wᵢ·level − 1/gᵢ)⁺`, with the level found by bisection.
#[derive(Debug, Clone)]
pub struct WaterFill {
    pub powers: Vec<f64>,
    pub level: f64,
}

pub fn weighted_water_filling(gains: &[f64], weights: &[f64], budget: f64) -> WaterFill {
    assert_eq!(gains.len(), weights.len());
    let usable = |i: usize| gains[i] > 0.0 && weights[i] > 0.0;
    let alloc = |level: f64| -> Vec<f64> {
        (0..gains.len())
            .map(|i| {
                if usable(i) {
                    (weights[i] * level - 1.0 / gains[i]).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let min_w = (0..gains.len())
        .filter(|&i| usable(i))
        .map(|i| weights[i])
        .fold(f64::INFINITY, f64::min);
    if !min_w.is_finite() || budget <= 0.0 {
        return WaterFill {
            powers: vec![0.0; gains.len()],
            level: 0.0,
        };
    }
    let inv_sum: f64 = (0..gains.len())
        .filter(|&i| usable(i))
        .map(|i| 1.0 / gains[i])
        .sum();
    let (mut lo, mut hi) = (0.0, (budget + inv_sum) / min_w);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if alloc(mid).iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let level = 0.5 * (lo + hi);
    WaterFill {
        powers: alloc(level),
        level,
    }
}

/// Uplink input covariances `Q_A`, `Q_B` (each `n_t × n_t`).
#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub q_a: DMatrix<f64>,
    pub q_b: DMatrix<f64>,
}

/// Eigenmodes of a channel: squared singular values and the matching right
/// singular vectors (as rows of `v_t`).
struct Modes {
    gains: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn modes(h: &DMatrix<f64>) -> Modes {
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    Modes {
        gains: svd.singular_values.iter().map(|s| s * s).collect(),
        v_t,
    }
}

fn covariance_from(modes: &Modes, powers: &[f64]) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(powers));
    let q = modes.v_t.transpose() * d * &modes.v_t;
    (&q + q.transpose()) * 0.5
}

/// Maximizes `α·½log₂det(I+H_A Q_A H_Aᵀ) + (1−α)·½log₂det(I+H_B Q_B H_Bᵀ)`
/// subject to `Tr(Q_A + Q_B) ≤ p_t`.
pub fn optimize_uplink_covariances(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    p_t: f64,
    alpha: f64,
) -> Result<CovariancePair> {
    check_alpha(alpha)?;
    check_budget("p_t", p_t)?;
    let (ma, mb) = (modes(h_ar), modes(h_br));
    let gains: Vec<f64> = ma.gains.iter().chain(&mb.gains).copied().collect();
    let weights: Vec<f64> = std::iter::repeat_n(alpha, ma.gains.len())
        .chain(std::iter::repeat_n(1.0 - alpha, mb.gains.len()))
        .collect();
    let wf = weighted_water_filling(&gains, &weights, p_t);
    let (pa, pb) = wf.powers.split_at(ma.gains.len());
    Ok(CovariancePair {
        q_a: covariance_from(&ma, pa),
        q_b: covariance_from(&mb, pb),
    })
}

/// Single-user water-filling covariance of `h` with budget `p`.
pub fn water_filling_covariance(h: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let m = modes(h);
    let wf = weighted_water_filling(&m.gains, &vec![1.0; m.gains.len()], p);
    covariance_from(&m, &wf.powers)
}

#[derive(Debug, Clone)]
pub struct RelayCovariance {
    pub q_r: DMatrix<f64>,
    /// Convergence record of the projected-gradient solve. A non-converged
    /// result still carries the best iterate.
    pub report: SolverReport,
}

impl RelayCovariance {
    pub fn converged(&self) -> bool {
        self.report.converged
    }
}

/// Maximizes `α·½log₂det(I+H_RB Q Hᵀ_RB) + (1−α)·½log₂det(I+H_RA Q Hᵀ_RA)`
/// over PSD `Q` with `Tr(Q) ≤ p_r`, starting from `(p_r/n_r)·I`.
pub fn optimize_relay_covariance(
    h_ra: &DMatrix<f64>,
    h_rb: &DMatrix<f64>,
    p_r: f64,
    alpha: f64,
) -> Result<RelayCovariance> {
    optimize_relay_covariance_from(h_ra, h_rb, p_r, alpha, None)
}

/// As [`optimize_relay_covariance`], from a caller-chosen starting point
/// (projected onto the feasible set first).
pub fn optimize_relay_covariance_from(
    h_ra: &DMatrix<f64>,
    h_rb: &DMatrix<f64>,
    p_r: f64,
    alpha: f64,
    start: Option<DMatrix<f64>>,
) -> Result<RelayCovariance> {
    check_alpha(alpha)?;
    check_budget("p_r", p_r)?;
    let n_r = h_ra.ncols();
    if h_rb.ncols() != n_r || h_ra.nrows() != h_rb.nrows() {
        return Err(Error::Dimension("downlink channels disagree".into()));
    }
    let problem = LogDetProblem {
        terms: vec![
            LogDetTerm {
                weight: alpha,
                channels: vec![(0, h_rb)],
            },
            LogDetTerm {
                weight: 1.0 - alpha,
                channels: vec![(0, h_ra)],
            },
        ],
        block_dims: vec![n_r],
        budget: p_r,
    };
    let start = match start {
        Some(q) if q.shape() == (n_r, n_r) => vec![q],
        Some(_) => return Err(Error::Dimension("start covariance has wrong shape".into())),
        None => problem.uniform_start(),
    };
    let (mut blocks, report) = problem.solve(start);
    Ok(RelayCovariance {
        q_r: blocks.remove(0),
        report,
    })
}

/// Downlink rate caps for a relay covariance: user A's rate is limited by
/// the relay→B link and vice versa.
pub fn downlink_caps(cs: &RealChannelSet, q_r: &DMatrix<f64>) -> Result<RatePair> {
    crate::eda::downlink_rates(cs.h_ra(), cs.h_rb(), q_r)
}

/// Cut-set bound evaluated at α-optimized covariances.
#[derive(Debug, Clone)]
pub struct UpperBound {
    pub rates: RatePair,
    pub uplink: RatePair,
    pub downlink: RatePair,
    pub covariances: CovariancePair,
    pub relay: RelayCovariance,
}

/// Upper bound pair: uplink covariances maximize the α-weighted uplink terms,
/// the relay covariance maximizes the α-weighted downlink terms, and each
/// user's bound is the minimum of its uplink term and the opposite user's
/// downlink term.
pub fn capacity_ub_pair(cs: &RealChannelSet, pc: &PowerConfig, alpha: f64) -> Result<UpperBound> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), pc.p_r, alpha)?;
    let downlink = downlink_caps(&cs, &relay.q_r)?;
    let (covariances, uplink) = uplink_bound(&cs, pc.p_t, alpha)?;
    Ok(UpperBound {
        rates: uplink.min(&downlink),
        uplink,
        downlink,
        covariances,
        relay,
    })
}

/// α-optimal uplink covariances and the resulting uplink terms.
pub fn uplink_bound(
    cs: &RealChannelSet,
    p_t: f64,
    alpha: f64,
) -> Result<(CovariancePair, RatePair)> {
    let cov = optimize_uplink_covariances(cs.h_ar(), cs.h_br(), p_t, alpha)?;
    let rates = RatePair {
        r_a: mimo_rate(cs.h_ar(), &cov.q_a)?,
        r_b: mimo_rate(cs.h_br(), &cov.q_b)?,
    };
    Ok((cov, rates))
}

/// Capacity of `h` under single-user water-filling with budget `p`.
fn water_filling_rate(m: &Modes, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let wf = weighted_water_filling(&m.gains, &vec![1.0; m.gains.len()], p);
    m.gains
        .iter()
        .zip(&wf.powers)
        .map(|(g, q)| 0.5 * (1.0 + g * q).log2())
        .sum()
}

/// Upper bound that accounts for the interaction of the two phases: the
/// α-weighted sum rate is maximized over the uplink region (all splits of
/// `p_t` between the users, each water-filling) intersected with the
/// downlink rectangle of the α-optimal relay covariance.
///
/// Every rate pair that uses the same relay covariance, including the
/// per-user-min point of [`capacity_ub_pair`], has a weighted sum no larger
/// than the returned pair.
pub fn capacity_ub_intersection(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    alpha: f64,
) -> Result<UpperBound> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), pc.p_r, alpha)?;
    let downlink = downlink_caps(&cs, &relay.q_r)?;
    let (ma, mb) = (modes(cs.h_ar()), modes(cs.h_br()));
    let p_t = pc.p_t;
    let pair = |p: f64| RatePair {
        r_a: water_filling_rate(&ma, p),
        r_b: water_filling_rate(&mb, p_t - p),
    };
    let value = |p: f64| pair(p).min(&downlink).weighted(alpha);

    // The objective is concave in the split, so golden-section search finds
    // its maximum; the endpoints are checked explicitly.
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, p_t);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..120 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = value(x1);
        }
        if hi - lo <= 1e-12 * p_t {
            break;
        }
    }
    let mut split = 0.5 * (lo + hi);
    for p in [0.0, p_t] {
        if value(p) > value(split) {
            split = p;
        }
    }
    let uplink = pair(split);
    let ones = |m: &Modes| vec![1.0; m.gains.len()];
    let covariances = CovariancePair {
        q_a: covariance_from(
            &ma,
            &weighted_water_filling(&ma.gains, &ones(&ma), split).powers,
        ),
        q_b: covariance_from(
            &mb,
            &weighted_water_filling(&mb.gains, &ones(&mb), p_t - split).powers,
        ),
    };
    Ok(UpperBound {
        rates: uplink.min(&downlink),
        uplink,
        downlink,
        covariances,
        relay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, Field};

    fn real_set(seed: u64, n_t: usize, n_r: usize) -> RealChannelSet {
        generate_channel(n_t, n_r, Field::Real, false, seed)
            .unwrap()
            .realization
            .to_real_model()
    }

    #[test]
    fn identity_rate_is_one_bit() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((mimo_rate(&i2, &i2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mimo_rate(&i2, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(mimo_rate(&i2, &q), Err(Error::Domain(_))));
        assert!(matches!(
            mimo_rate(&i2, &DMatrix::identity(3, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn symmetric_uplink_splits_evenly() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let cov = optimize_uplink_covariances(&i2, &i2, 4.0, 0.5).unwrap();
        assert!((&cov.q_a - &i2).amax() < 1e-12);
        assert!((&cov.q_b - &i2).amax() < 1e-12);
        let wsr = 0.5 * mimo_rate(&i2, &cov.q_a).unwrap() + 0.5 * mimo_rate(&i2, &cov.q_b).unwrap();
        assert!((wsr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_weight_on_a_is_single_user_water_filling() {
        let cs = real_set(3, 3, 2);
        let cov = optimize_uplink_covariances(cs.h_ar(), cs.h_br(), 7.0, 1.0).unwrap();
        assert_eq!(cov.q_b.amax(), 0.0);
        let wf = water_filling_covariance(cs.h_ar(), 7.0);
        assert!((&cov.q_a - wf).amax() < 1e-12);
        assert!((cov.q_a.trace() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn water_filling_kkt() {
        let gains = [4.0, 1.0, 0.2, 0.05];
        let weights = [0.7, 0.7, 0.3, 0.3];
        let wf = weighted_water_filling(&gains, &weights, 3.0);
        assert!((wf.powers.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        for i in 0..4 {
            // d/dp of wᵢ ln(1 + gᵢp) equals 1/level on active modes, at most
            // 1/level on inactive ones.
            let slope = weights[i] * gains[i] / (1.0 + gains[i] * wf.powers[i]);
            if wf.powers[i] > 0.0 {
                assert!((slope * wf.level - 1.0).abs() < 1e-8);
            } else {
                assert!(slope * wf.level <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn equal_modes_get_equal_power() {
        let wf = weighted_water_filling(&[2.0, 2.0, 0.5], &[1.0, 1.0, 1.0], 1.0);
        assert_eq!(wf.powers[0], wf.powers[1]);
    }

    #[test]
    fn symmetric_relay_is_scaled_identity() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let relay = optimize_relay_covariance(&i3, &i3, 6.0, alpha).unwrap();
            assert!((&relay.q_r - &i3 * 2.0).amax() < 1e-9, "alpha {alpha}");
            assert!(relay.converged());
        }
    }

    #[test]
    fn relay_history_is_monotone() {
        let cs = real_set(11, 4, 3);
        let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), 20.0, 0.3).unwrap();
        assert!(relay.report.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(relay.q_r.trace() <= 20.0 * (1.0 + 1e-9));
    }

    #[test]
    fn relay_at_full_weight_matches_water_filling() {
        for seed in 0..10 {
            let cs = real_set(seed, 3, 2);
            let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), 10.0, 1.0).unwrap();
            let pg = mimo_rate(cs.h_rb(), &relay.q_r).unwrap();
            let wf = mimo_rate(cs.h_rb(), &water_filling_covariance(cs.h_rb(), 10.0)).unwrap();
            assert!((pg - wf).abs() < 1e-4, "seed {seed}: {pg} vs {wf}");
        }
    }

    #[test]
    fn relay_restart_agrees() {
        for seed in 0..10 {
            let cs = real_set(100 + seed, 4, 4);
            let a = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), 30.0, 0.5).unwrap();
            let mut start = DMatrix::zeros(4, 4);
            start[(seed as usize % 4, seed as usize % 4)] = 30.0;
            let b = optimize_relay_covariance_from(cs.h_ra(), cs.h_rb(), 30.0, 0.5, Some(start))
                .unwrap();
            assert!(
                (a.report.objective - b.report.objective).abs() < 1e-4,
                "seed {seed}: {} vs {}",
                a.report.objective,
                b.report.objective
            );
        }
    }

    #[test]
    fn huge_relay_power_leaves_uplink_terms() {
        let cs = real_set(5, 2, 2);
        let pc = PowerConfig::unit_noise(20.0, 1e9).unwrap();
        let ub = capacity_ub_pair(&cs, &pc, 0.5).unwrap();
        assert_eq!(ub.rates, ub.uplink);
    }

    #[test]
    fn vanishing_uplink_power_gives_zero() {
        let cs = real_set(6, 2, 2);
        let pc = PowerConfig::unit_noise(1e-12, 10.0).unwrap();
        let ub = capacity_ub_pair(&cs, &pc, 0.5).unwrap();
        assert!(ub.rates.r_a < 1e-9 && ub.rates.r_b < 1e-9);
    }

    #[test]
    fn intersection_bound_dominates_per_user_min() {
        for seed in 0..20 {
            let cs = real_set(300 + seed, 2, 2);
            let pc = PowerConfig::from_snr_db(15.0);
            for alpha in [0.2, 0.5, 0.8] {
                let a = capacity_ub_pair(&cs, &pc, alpha).unwrap();
                let b = capacity_ub_intersection(&cs, &pc, alpha).unwrap();
                assert!(
                    b.rates.weighted(alpha) >= a.rates.weighted(alpha) - 1e-9,
                    "seed {seed} alpha {alpha}"
                );
                let used = b.covariances.q_a.trace() + b.covariances.q_b.trace();
                assert!(used <= pc.p_t * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn rejects_bad_weight() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!(optimize_uplink_covariances(&i2, &i2, 1.0, 1.5).is_err());
        assert!(optimize_relay_covariance(&i2, &i2, 1.0, -0.1).is_err());
        assert!(optimize_relay_covariance(&i2, &i2, 0.0, 0.5).is_err());
    }
}
