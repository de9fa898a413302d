//! Comparison schemes: decode-and-forward network coding (DF-NC) and naive
//! EDA with `K = I`.
//!
//! The DF-NC uplink uses the standard two-user Gaussian MAC outer bound
//! (individual and sum mutual-information constraints), maximized per weight
//! `α` by projected gradient ascent; the downlink is the same broadcast
//! bound used by the other schemes. Each region point is the componentwise
//! minimum of the two phases.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::capacity::{optimize_relay_covariance, SolverReport};
use crate::channel::{PowerConfig, RatePair, RealChannelSet};
use crate::eda::downlink_rates;
use crate::optimizers::{
    approx_solution_1_with, approx_solution_2_with, As1Options, As2Options, ChannelGrams,
    RotationMode, WsrSolution,
};
use crate::solver::{LogDetProblem, LogDetTerm};
use crate::{Error, Result};

/// Schemes the simulator can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CapacityUb,
    EdaExhaustive,
    EdaAs1,
    EdaAs2,
    NaiveEda,
    Dfnc,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::CapacityUb,
        Scheme::EdaExhaustive,
        Scheme::EdaAs1,
        Scheme::EdaAs2,
        Scheme::NaiveEda,
        Scheme::Dfnc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::CapacityUb => "capacity_ub",
            Scheme::EdaExhaustive => "eda_exhaustive",
            Scheme::EdaAs1 => "eda_as1",
            Scheme::EdaAs2 => "eda_as2",
            Scheme::NaiveEda => "naive_eda",
            Scheme::Dfnc => "dfnc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown scheme '{s}'")))
    }
}

/// Pareto points of one scheme, indexed by the weight `α` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    pub scheme: Scheme,
    pub points: Vec<(f64, RatePair)>,
    /// Points whose solver stopped before converging.
    pub unconverged: usize,
}

impl RateRegion {
    pub fn new(scheme: Scheme, points: Vec<(f64, RatePair)>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::Domain(
                "region weights must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|(a, _)| !(0.0..=1.0).contains(a)) {
            return Err(Error::Domain("region weights must lie in [0, 1]".into()));
        }
        if points.iter().any(|(_, r)| !(r.r_a >= 0.0 && r.r_b >= 0.0)) {
            return Err(Error::Domain("region rates must be nonnegative".into()));
        }
        Ok(RateRegion {
            scheme,
            points,
            unconverged: 0,
        })
    }
}

/// Corner of the MAC pentagon favoured by `α` (the midpoint of the sum-rate
/// face at `α = ½`), with covariances maximizing the weighted sum.
pub fn mac_uplink_point(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    p_t: f64,
    alpha: f64,
) -> Result<(RatePair, SolverReport)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "weight alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::Domain(format!("p_t must be positive, got {p_t}")));
    }
    let n_t = h_ar.ncols();
    let sum = LogDetTerm {
        weight: alpha.min(1.0 - alpha),
        channels: vec![(0, h_ar), (1, h_br)],
    };
    let single = if alpha >= 0.5 {
        LogDetTerm {
            weight: 2.0 * alpha - 1.0,
            channels: vec![(0, h_ar)],
        }
    } else {
        LogDetTerm {
            weight: 1.0 - 2.0 * alpha,
            channels: vec![(1, h_br)],
        }
    };
    let problem = LogDetProblem {
        terms: vec![single, sum],
        block_dims: vec![n_t, h_br.ncols()],
        budget: p_t,
    };
    let (q, report) = problem.solve(problem.uniform_start());
    let rate = |terms: Vec<(usize, &DMatrix<f64>)>| {
        LogDetProblem {
            terms: vec![LogDetTerm {
                weight: 1.0,
                channels: terms,
            }],
            block_dims: problem.block_dims.clone(),
            budget: p_t,
        }
        .objective(&q)
        .max(0.0)
    };
    let i_a = rate(vec![(0, h_ar)]);
    let i_b = rate(vec![(1, h_br)]);
    let i_sum = rate(vec![(0, h_ar), (1, h_br)]);
    let a_first = RatePair {
        r_a: i_a,
        r_b: (i_sum - i_a).max(0.0),
    };
    let b_first = RatePair {
        r_a: (i_sum - i_b).max(0.0),
        r_b: i_b,
    };
    let point = if alpha > 0.5 {
        a_first
    } else if alpha < 0.5 {
        b_first
    } else {
        RatePair {
            r_a: 0.5 * (a_first.r_a + b_first.r_a),
            r_b: 0.5 * (a_first.r_b + b_first.r_b),
        }
    };
    Ok((point, report))
}

/// One DF-NC region point on whitened channels with a given downlink cap.
pub fn dfnc_point(
    cs: &RealChannelSet,
    p_t: f64,
    downlink: &RatePair,
    alpha: f64,
) -> Result<(RatePair, bool)> {
    let (uplink, report) = mac_uplink_point(cs.h_ar(), cs.h_br(), p_t, alpha)?;
    Ok((uplink.min(downlink), report.converged))
}

/// DF-NC region traced over `alpha_grid` (strictly increasing in `[0, 1]`).
pub fn dfnc_region(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    alpha_grid: &[f64],
) -> Result<RateRegion> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let mut points = Vec::with_capacity(alpha_grid.len());
    let mut unconverged = 0;
    for &alpha in alpha_grid {
        let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), pc.p_r, alpha)?;
        let downlink = downlink_rates(cs.h_ra(), cs.h_rb(), &relay.q_r)?;
        let (pair, converged) = dfnc_point(&cs, pc.p_t, &downlink, alpha)?;
        unconverged += usize::from(!converged || !relay.converged());
        points.push((alpha, pair));
    }
    let mut region = RateRegion::new(Scheme::Dfnc, points)?;
    region.unconverged = unconverged;
    Ok(region)
}

/// Naive EDA (`K = I`) with amplitudes from the AS-I/AS-II machinery.
pub fn naive_eda_solution(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    alpha: f64,
) -> Result<WsrSolution> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let grams = ChannelGrams::new(cs.h_ar(), cs.h_br())?;
    naive_eda_with(&grams, pc.p_t, alpha, &As1Options::default())
}

/// As [`naive_eda_solution`] on precomputed (whitened) Gram inverses. The
/// rotation mode in `opts` is overridden.
pub fn naive_eda_with(
    grams: &ChannelGrams,
    p_t: f64,
    alpha: f64,
    opts: &As1Options,
) -> Result<WsrSolution> {
    let opts = As1Options {
        rotation: RotationMode::Identity,
        ..opts.clone()
    };
    let as1 = approx_solution_1_with(grams, p_t, alpha, &opts)?;
    approx_solution_2_with(grams, p_t, alpha, &as1, &As2Options::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, Field};
    use crate::eda::transmit_power;
    use crate::optimizers::{approx_solution_1, approx_solution_2, exhaustive_search_2d, GridSpec};

    fn real_set(seed: u64, n_t: usize, n_r: usize) -> RealChannelSet {
        generate_channel(n_t, n_r, Field::Real, false, seed)
            .unwrap()
            .realization
            .to_real_model()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("anc".parse::<Scheme>().is_err());
    }

    #[test]
    fn region_validation() {
        let r = RatePair::ZERO;
        assert!(RateRegion::new(Scheme::Dfnc, vec![(0.5, r), (0.5, r)]).is_err());
        assert!(RateRegion::new(Scheme::Dfnc, vec![(0.0, r), (1.2, r)]).is_err());
        assert!(RateRegion::new(Scheme::Dfnc, vec![(0.0, r), (1.0, r)]).is_ok());
    }

    #[test]
    fn tiny_power_gives_zero_region() {
        let cs = real_set(1, 2, 2);
        let pc = PowerConfig::unit_noise(1e-12, 1e-12).unwrap();
        let region = dfnc_region(&cs, &pc, &[0.0, 0.5, 1.0]).unwrap();
        for (_, p) in region.points {
            assert!(p.r_a < 1e-9 && p.r_b < 1e-9);
        }
    }

    #[test]
    fn symmetric_channels_give_equal_rates() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let cs = RealChannelSet::reciprocal(i2.clone(), i2.clone()).unwrap();
        let pc = PowerConfig::unit_noise(8.0, 8.0).unwrap();
        let region = dfnc_region(&cs, &pc, &[0.5]).unwrap();
        let p = region.points[0].1;
        assert!((p.r_a - p.r_b).abs() < 1e-6);
        // Best case for the sum bound: the whole budget spread evenly.
        let sum_bound = 0.5 * (2.0 * (1.0 + 4.0f64).log2());
        assert!(p.sum() <= sum_bound + 1e-6);
    }

    #[test]
    fn mac_point_is_inside_pentagon() {
        let cs = real_set(4, 3, 2);
        for alpha in [0.0, 0.3, 0.5, 0.7, 1.0] {
            let (p, report) = mac_uplink_point(cs.h_ar(), cs.h_br(), 30.0, alpha).unwrap();
            assert!(report.converged);
            assert!(p.r_a >= 0.0 && p.r_b >= 0.0);
        }
        let (a, _) = mac_uplink_point(cs.h_ar(), cs.h_br(), 30.0, 0.9).unwrap();
        let (b, _) = mac_uplink_point(cs.h_ar(), cs.h_br(), 30.0, 0.1).unwrap();
        assert!(a.r_a > b.r_a && a.r_b < b.r_b);
    }

    #[test]
    fn naive_matches_proposed_with_orthonormal_rows() {
        let s = 0.5;
        let h = DMatrix::from_row_slice(2, 4, &[s, s, s, s, s, -s, s, -s]);
        let g = DMatrix::from_row_slice(2, 4, &[s, s, -s, -s, s, -s, -s, s]);
        let cs = RealChannelSet::reciprocal(h.clone(), g.clone()).unwrap();
        let pc = PowerConfig::from_snr_db(15.0);
        let naive = naive_eda_solution(&cs, &pc, 0.5).unwrap();
        let as1 = approx_solution_1(&h, &g, pc.p_t, 0.5, 0.02).unwrap();
        let as2 = approx_solution_2(&h, &g, pc.p_t, 0.5, &as1).unwrap();
        assert!((naive.wsr - as2.wsr).abs() < 1e-9);
    }

    #[test]
    fn naive_loses_on_ill_conditioned_channel() {
        // Condition number 100 for H_A.
        let h_a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.01]);
        let rot = |t: f64| {
            let (s, c) = t.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        };
        let h_a = rot(0.4) * h_a * rot(1.1);
        let h_b = DMatrix::from_row_slice(2, 2, &[0.8, 0.3, -0.2, 1.1]);
        let cs = RealChannelSet::reciprocal(h_a.clone(), h_b.clone()).unwrap();
        let pc = PowerConfig::from_snr_db(20.0);
        let naive = naive_eda_solution(&cs, &pc, 0.5).unwrap();
        let as1 = approx_solution_1(&h_a, &h_b, pc.p_t, 0.5, 0.02).unwrap();
        let as2 = approx_solution_2(&h_a, &h_b, pc.p_t, 0.5, &as1).unwrap();
        assert!(naive.wsr < as2.wsr, "{} vs {}", naive.wsr, as2.wsr);
    }

    #[test]
    fn naive_is_feasible_and_below_exhaustive() {
        for seed in 0..10 {
            let cs = real_set(60 + seed, 2, 2);
            let pc = PowerConfig::from_snr_db(15.0);
            let naive = naive_eda_solution(&cs, &pc, 0.5).unwrap();
            assert_eq!(naive.cfg.k, DMatrix::identity(2, 2));
            let used = transmit_power(cs.h_ar(), cs.h_br(), &naive.cfg).unwrap();
            assert!(used <= pc.p_t * (1.0 + 1e-6));
            let ex = exhaustive_search_2d(cs.h_ar(), cs.h_br(), pc.p_t, 0.5, &GridSpec::default())
                .unwrap();
            assert!(naive.wsr <= ex.wsr + 1e-3, "seed {seed}");
        }
    }
}
