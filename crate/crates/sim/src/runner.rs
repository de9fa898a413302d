//! Monte-Carlo runs: sum-rate curves, rate regions and the asymptotic gap.
//!
//! Trial `k` draws its channel from stream `k` of the master seed, and the
//! same channel is reused at every SNR and weight. Trials run on a rayon
//! pool, results are collected in trial order and reduced with pairwise
//! summation, so the output does not depend on the number of workers.

use edapnc::benchmarks::{dfnc_point, naive_eda_with, Scheme};
use edapnc::capacity::{optimize_relay_covariance, uplink_bound};
use edapnc::channel::{
    generate_channel_with, trial_rng, Field, PowerConfig, RatePair, RealChannelSet,
};
use edapnc::eda::{downlink_rates, stream_costs, uplink_rates};
use edapnc::optimizers::{
    approx_solution_1_with, approx_solution_2_with, exhaustive_search_2d, As1Options, As2Options,
    ChannelGrams, GridSpec, WsrSolution,
};
use edapnc::Result as CoreResult;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::scenario::Scenario;
use crate::HarnessError;

/// Averaged result of one scheme at one SNR and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub alpha: f64,
    pub mean_r_a: f64,
    pub mean_r_b: f64,
    pub mean_sum: f64,
    /// Standard error of the mean sum rate.
    pub stderr: f64,
    pub trials: usize,
}

/// Rows of a run plus bookkeeping for the summary line.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub solver_warnings: usize,
    pub redraws: u64,
}

#[derive(Debug, Clone)]
pub struct CurveRun {
    pub points: Vec<CurvePoint>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RegionRun {
    pub regions: Vec<edapnc::benchmarks::RateRegion>,
    pub points: Vec<CurvePoint>,
    pub summary: RunSummary,
}

/// One row of the asymptotic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n_t: usize,
    pub n_r: usize,
    pub snr_db: f64,
    /// Mean of (UB sum rate − AS-II sum rate).
    pub mean_gap: f64,
    pub gap_stderr: f64,
    /// Mean gap of the `K = I`, uniform-amplitude configuration.
    pub uniform_gap: f64,
    pub uniform_stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct GapRun {
    pub rows: Vec<GapRow>,
    pub summary: RunSummary,
}

/// Solver settings shared by every scheme evaluation.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub delta: f64,
    pub grid: GridSpec,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            delta: 0.02,
            grid: GridSpec::default(),
        }
    }
}

impl EvalOptions {
    pub fn from_scenario(sc: &Scenario) -> Self {
        EvalOptions {
            delta: sc.delta,
            grid: sc.grid_spec(),
        }
    }
}

/// Budgets and noise of the real-valued model for a per-user SNR: relay
/// SNR equals user SNR, unit noise; complex models put half the noise on
/// each real dimension.
pub fn power_config(field: Field, snr_db: f64) -> PowerConfig {
    let pc = PowerConfig::from_snr_db(snr_db);
    match field {
        Field::Real => pc,
        Field::Complex => pc.real_equivalent(),
    }
}

/// Real-model channel of trial `trial` and the number of rejected draws.
pub fn draw_trial(
    n_t: usize,
    n_r: usize,
    field: Field,
    reciprocal: bool,
    seed: u64,
    trial: u64,
) -> CoreResult<(RealChannelSet, u32)> {
    let draw = generate_channel_with(&mut trial_rng(seed, trial), n_t, n_r, field, reciprocal)?;
    Ok((draw.realization.to_real_model(), draw.redraws))
}

/// Rate pairs of `schemes` (same order) on one realization.
#[derive(Debug, Clone)]
pub struct SchemeRates {
    pub rates: Vec<RatePair>,
    pub warnings: usize,
}

/// Evaluates every scheme at weight `alpha`. All schemes share the relay
/// covariance optimized for `alpha`; each rate pair is the uplink pair
/// capped by the downlink pair.
pub fn evaluate_schemes(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    alpha: f64,
    schemes: &[Scheme],
    opts: &EvalOptions,
) -> CoreResult<SchemeRates> {
    pc.validate()?;
    let cs = cs.whiten(pc);
    let p_t = pc.p_t;
    let relay = optimize_relay_covariance(cs.h_ra(), cs.h_rb(), pc.p_r, alpha)?;
    let mut warnings = usize::from(!relay.converged());
    let downlink = downlink_rates(cs.h_ra(), cs.h_rb(), &relay.q_r)?;

    let needs_grams = schemes
        .iter()
        .any(|s| matches!(s, Scheme::EdaAs1 | Scheme::EdaAs2 | Scheme::NaiveEda));
    let grams = if needs_grams {
        Some(ChannelGrams::new(cs.h_ar(), cs.h_br())?)
    } else {
        None
    };
    let as1_opts = As1Options {
        delta: opts.delta,
        ..As1Options::default()
    };
    let mut as1: Option<WsrSolution> = None;
    let mut as1_solution = |grams: &ChannelGrams| -> CoreResult<WsrSolution> {
        if as1.is_none() {
            as1 = Some(approx_solution_1_with(grams, p_t, alpha, &as1_opts)?);
        }
        Ok(as1.clone().expect("just computed"))
    };

    let mut rates = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let uplink = match scheme {
            Scheme::CapacityUb => uplink_bound(&cs, p_t, alpha)?.1,
            Scheme::EdaExhaustive => {
                exhaustive_search_2d(cs.h_ar(), cs.h_br(), p_t, alpha, &opts.grid)?.rates
            }
            Scheme::EdaAs1 => as1_solution(grams.as_ref().expect("grams"))?.rates,
            Scheme::EdaAs2 => {
                let g = grams.as_ref().expect("grams");
                let s1 = as1_solution(g)?;
                approx_solution_2_with(g, p_t, alpha, &s1, &As2Options::default())?.rates
            }
            Scheme::NaiveEda => {
                naive_eda_with(grams.as_ref().expect("grams"), p_t, alpha, &as1_opts)?.rates
            }
            Scheme::Dfnc => {
                let (pair, converged) = dfnc_point(&cs, p_t, &downlink, alpha)?;
                warnings += usize::from(!converged);
                rates.push(pair);
                continue;
            }
        };
        rates.push(uplink.min(&downlink));
    }
    Ok(SchemeRates { rates, warnings })
}

/// Sum of `values` by recursive halving. The association order depends only
/// on the length, which keeps results reproducible and rounding error
/// `O(log n)`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

/// Per-trial results: `outcome[setting][scheme]` plus warnings and redraws.
struct TrialOutcome {
    rates: Vec<Vec<RatePair>>,
    warnings: usize,
    redraws: u32,
}

fn run_trials<F>(
    sc: &Scenario,
    workers: Option<usize>,
    settings: &[(f64, f64)],
    evaluate: F,
) -> Result<(Vec<TrialOutcome>, RunSummary), HarnessError>
where
    F: Fn(&RealChannelSet, f64, f64) -> CoreResult<SchemeRates> + Sync,
{
    let pool = pool(workers)?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..sc.trials as u64)
            .into_par_iter()
            .map(|trial| -> CoreResult<TrialOutcome> {
                let (cs, redraws) =
                    draw_trial(sc.n_t, sc.n_r, sc.field, sc.reciprocal, sc.seed, trial)?;
                let mut rates = Vec::with_capacity(settings.len());
                let mut warnings = 0;
                for &(snr, alpha) in settings {
                    let r = evaluate(&cs, snr, alpha)?;
                    warnings += r.warnings;
                    rates.push(r.rates);
                }
                Ok(TrialOutcome {
                    rates,
                    warnings,
                    redraws,
                })
            })
            .collect::<CoreResult<Vec<_>>>()
    })?;
    let summary = RunSummary {
        solver_warnings: outcomes.iter().map(|o| o.warnings).sum(),
        redraws: outcomes.iter().map(|o| u64::from(o.redraws)).sum(),
    };
    Ok((outcomes, summary))
}

fn aggregate(
    outcomes: &[TrialOutcome],
    settings: &[(f64, f64)],
    schemes: &[Scheme],
) -> Vec<CurvePoint> {
    let mut points = Vec::with_capacity(settings.len() * schemes.len());
    for (k, &(snr_db, alpha)) in settings.iter().enumerate() {
        for (j, &scheme) in schemes.iter().enumerate() {
            let pick = |f: fn(&RatePair) -> f64| -> Vec<f64> {
                outcomes.iter().map(|o| f(&o.rates[k][j])).collect()
            };
            let (mean_r_a, _) = mean_stderr(&pick(|r| r.r_a));
            let (mean_r_b, _) = mean_stderr(&pick(|r| r.r_b));
            let (mean_sum, stderr) = mean_stderr(&pick(|r| r.sum()));
            points.push(CurvePoint {
                snr_db,
                scheme,
                alpha,
                mean_r_a,
                mean_r_b,
                mean_sum,
                stderr,
                trials: outcomes.len(),
            });
        }
    }
    points
}

/// Mean rates of every scheme at `α = ½` for each SNR of the scenario.
pub fn run_sum_rate_curve(sc: &Scenario, workers: Option<usize>) -> Result<CurveRun, HarnessError> {
    sc.validate()?;
    let opts = EvalOptions::from_scenario(sc);
    let settings: Vec<(f64, f64)> = sc.snr_grid_db.iter().map(|&s| (s, 0.5)).collect();
    let (outcomes, summary) = run_trials(sc, workers, &settings, |cs, snr, alpha| {
        evaluate_schemes(cs, &power_config(sc.field, snr), alpha, &sc.schemes, &opts)
    })?;
    Ok(CurveRun {
        points: aggregate(&outcomes, &settings, &sc.schemes),
        summary,
    })
}

/// Averaged rate regions of every scheme over the scenario's weight grid.
pub fn run_rate_region(
    sc: &Scenario,
    snr_db: f64,
    workers: Option<usize>,
) -> Result<RegionRun, HarnessError> {
    sc.validate()?;
    let opts = EvalOptions::from_scenario(sc);
    let settings: Vec<(f64, f64)> = sc.alpha_grid.iter().map(|&a| (snr_db, a)).collect();
    let pc = power_config(sc.field, snr_db);
    let (outcomes, summary) = run_trials(sc, workers, &settings, |cs, _, alpha| {
        evaluate_schemes(cs, &pc, alpha, &sc.schemes, &opts)
    })?;
    let points = aggregate(&outcomes, &settings, &sc.schemes);
    let mut regions = Vec::with_capacity(sc.schemes.len());
    for &scheme in &sc.schemes {
        let pts = points
            .iter()
            .filter(|p| p.scheme == scheme)
            .map(|p| {
                (
                    p.alpha,
                    RatePair {
                        r_a: p.mean_r_a,
                        r_b: p.mean_r_b,
                    },
                )
            })
            .collect();
        regions.push(edapnc::benchmarks::RateRegion::new(scheme, pts)?);
    }
    Ok(RegionRun {
        regions,
        points,
        summary,
    })
}

/// Sum-rate gaps to the upper bound on one realization: AS-II and the
/// `K = I` configuration with equal amplitudes on every stream, scaled onto
/// the power budget.
pub fn gap_for_realization(
    cs: &RealChannelSet,
    pc: &PowerConfig,
    delta: f64,
) -> CoreResult<(f64, f64, usize)> {
    let schemes = [Scheme::CapacityUb, Scheme::EdaAs2];
    let opts = EvalOptions {
        delta,
        ..EvalOptions::default()
    };
    let r = evaluate_schemes(cs, pc, 0.5, &schemes, &opts)?;
    let ub = r.rates[0].sum();

    let w = cs.whiten(pc);
    let grams = ChannelGrams::new(w.h_ar(), w.h_br())?;
    let n_r = grams.n_r();
    let identity = nalgebra::DMatrix::identity(n_r, n_r);
    let cost: f64 =
        stream_costs(&grams.inv_a, &identity).sum() + stream_costs(&grams.inv_b, &identity).sum();
    let psi = DVector::from_element(n_r, (pc.p_t / cost).sqrt());
    let relay = optimize_relay_covariance(w.h_ra(), w.h_rb(), pc.p_r, 0.5)?;
    let downlink = downlink_rates(w.h_ra(), w.h_rb(), &relay.q_r)?;
    let uniform = uplink_rates(&psi, &psi)?.min(&downlink);
    Ok((ub - r.rates[1].sum(), ub - uniform.sum(), r.warnings))
}

/// Mean gap between the sum-rate upper bound and EDA-PNC for each transmit
/// antenna count in `sc.n_t_list` (or `sc.n_t` when the list is empty) and
/// each SNR of the scenario.
pub fn run_asymptotic_gap(sc: &Scenario, workers: Option<usize>) -> Result<GapRun, HarnessError> {
    sc.validate()?;
    let n_t_list = if sc.n_t_list.is_empty() {
        vec![sc.n_t]
    } else {
        sc.n_t_list.clone()
    };
    let pool = pool(workers)?;
    let mut rows = Vec::new();
    let mut summary = RunSummary::default();
    for &n_t in &n_t_list {
        let outcomes: Vec<(Vec<(f64, f64)>, usize, u32)> = pool.install(|| {
            (0..sc.trials as u64)
                .into_par_iter()
                .map(|trial| -> CoreResult<_> {
                    let (cs, redraws) =
                        draw_trial(n_t, sc.n_r, sc.field, sc.reciprocal, sc.seed, trial)?;
                    let mut gaps = Vec::with_capacity(sc.snr_grid_db.len());
                    let mut warnings = 0;
                    for &snr in &sc.snr_grid_db {
                        let (g, u, w) =
                            gap_for_realization(&cs, &power_config(sc.field, snr), sc.delta)?;
                        gaps.push((g, u));
                        warnings += w;
                    }
                    Ok((gaps, warnings, redraws))
                })
                .collect::<CoreResult<Vec<_>>>()
        })?;
        summary.solver_warnings += outcomes.iter().map(|o| o.1).sum::<usize>();
        summary.redraws += outcomes.iter().map(|o| u64::from(o.2)).sum::<u64>();
        for (k, &snr_db) in sc.snr_grid_db.iter().enumerate() {
            let gaps: Vec<f64> = outcomes.iter().map(|o| o.0[k].0).collect();
            let uniform: Vec<f64> = outcomes.iter().map(|o| o.0[k].1).collect();
            let (mean_gap, gap_stderr) = mean_stderr(&gaps);
            let (uniform_gap, uniform_stderr) = mean_stderr(&uniform);
            rows.push(GapRow {
                n_t,
                n_r: sc.n_r,
                snr_db,
                mean_gap,
                gap_stderr,
                uniform_gap,
                uniform_stderr,
                trials: sc.trials,
            });
        }
    }
    Ok(GapRun { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(mean_stderr(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn complex_power_halves_noise() {
        let pc = power_config(Field::Complex, 10.0);
        assert_eq!(pc.sigma_r2, 0.5);
        assert_eq!(pc.p_t, power_config(Field::Real, 10.0).p_t);
    }
}
