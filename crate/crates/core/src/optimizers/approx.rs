use nalgebra::{DMatrix, DVector};

use super::gamma::{gamma_grid, ChannelGrams};
use super::waterfill::{waterfill_sigma, StreamSet};
use super::{Method, WsrSolution};
use crate::eda::PrecoderConfig;
use crate::{Error, Result};

/// How AS-I picks the rotation for each `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationMode {
    /// `K = U_G(γ)`, stream costs `Λ_G(γ)`.
    Unitary,
    /// `K = I` (naive EDA), stream costs `diag G(γ)`.
    Identity,
}

#[derive(Debug, Clone)]
pub struct As1Options {
    pub delta: f64,
    /// Try every `(S_A, S_B)` pair instead of `S_A = S_B = all`. Limited to
    /// three streams.
    pub full_set_search: bool,
    pub rotation: RotationMode,
}

impl Default for As1Options {
    fn default() -> Self {
        As1Options {
            delta: 0.02,
            full_set_search: false,
            rotation: RotationMode::Unitary,
        }
    }
}

#[derive(Debug, Clone)]
pub struct As2Options {
    pub max_rounds: usize,
    /// Stop once the WSR changes by less than this between rounds.
    pub tolerance: f64,
}

impl Default for As2Options {
    fn default() -> Self {
        As2Options {
            max_rounds: 100,
            tolerance: 1e-6,
        }
    }
}

const MAX_FULL_SEARCH_STREAMS: usize = 3;

fn check_inputs(p_t: f64, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "weight alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::Domain(format!("p_t must be positive, got {p_t}")));
    }
    Ok(())
}

pub fn approx_solution_1(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    p_t: f64,
    alpha: f64,
    delta: f64,
) -> Result<WsrSolution> {
    let grams = ChannelGrams::new(h_ar, h_br)?;
    let opts = As1Options {
        delta,
        ..As1Options::default()
    };
    approx_solution_1_with(&grams, p_t, alpha, &opts)
}

pub fn approx_solution_1_with(
    grams: &ChannelGrams,
    p_t: f64,
    alpha: f64,
    opts: &As1Options,
) -> Result<WsrSolution> {
    check_inputs(p_t, alpha)?;
    let n = grams.n_r();
    let set_pairs: Vec<(StreamSet, StreamSet)> = if opts.full_set_search {
        if n > MAX_FULL_SEARCH_STREAMS {
            return Err(Error::Unsupported(format!(
                "full stream-set search needs at most {MAX_FULL_SEARCH_STREAMS} streams, got {n}"
            )));
        }
        let subsets = 1u64 << n;
        (0..subsets)
            .flat_map(|a| {
                (0..subsets).map(move |b| (StreamSet::from_bits(a), StreamSet::from_bits(b)))
            })
            .collect()
    } else {
        vec![(StreamSet::all(n), StreamSet::all(n))]
    };

    let mut best: Option<WsrSolution> = None;
    for gamma in gamma_grid(opts.delta)? {
        let (k, costs) = match opts.rotation {
            RotationMode::Unitary => {
                let gd = grams.decompose(gamma);
                (gd.u_g, gd.lambda_g)
            }
            RotationMode::Identity => (DMatrix::identity(n, n), grams.g(gamma).diagonal()),
        };
        for &(s_a, s_b) in &set_pairs {
            let sol = waterfill_sigma(&costs, gamma, alpha, p_t, s_a, s_b)?;
            let cfg = PrecoderConfig {
                k: k.clone(),
                psi_b: &sol.sigma * gamma,
                psi_a: sol.sigma,
                gamma: Some(gamma),
            };
            let cand = WsrSolution::evaluate(cfg, alpha, Method::As1)?;
            if best.as_ref().is_none_or(|b| cand.wsr > b.wsr) {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("gamma grid is never empty"))
}

pub fn approx_solution_2(
    h_ar: &DMatrix<f64>,
    h_br: &DMatrix<f64>,
    p_t: f64,
    alpha: f64,
    as1: &WsrSolution,
) -> Result<WsrSolution> {
    let grams = ChannelGrams::new(h_ar, h_br)?;
    approx_solution_2_with(&grams, p_t, alpha, as1, &As2Options::default())
}

/// Squared amplitudes maximizing
/// `α/2 Σ log₂(θᵢ + aᵢ) + (1−α)/2 Σ log₂(1 − θᵢ + bᵢ)` subject to
/// `Σ c_Aᵢ aᵢ + c_Bᵢ bᵢ = p_t`.
fn fixed_ratio_powers(
    theta: &[f64],
    c_a: &DVector<f64>,
    c_b: &DVector<f64>,
    alpha: f64,
    p_t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = theta.len();
    let alloc = |level: f64| -> (Vec<f64>, Vec<f64>) {
        let a = (0..n)
            .map(|i| (alpha * level / c_a[i] - theta[i]).max(0.0))
            .collect();
        let b = (0..n)
            .map(|i| ((1.0 - alpha) * level / c_b[i] - (1.0 - theta[i])).max(0.0))
            .collect();
        (a, b)
    };
    let spend = |level: f64| -> f64 {
        (0..n)
            .map(|i| {
                (alpha * level - theta[i] * c_a[i]).max(0.0)
                    + ((1.0 - alpha) * level - (1.0 - theta[i]) * c_b[i]).max(0.0)
            })
            .sum()
    };
    let w = alpha.max(1.0 - alpha);
    let floor: f64 = (0..n)
        .map(|i| theta[i] * c_a[i] + (1.0 - theta[i]) * c_b[i])
        .sum();
    let (mut lo, mut hi) = (0.0, (p_t + floor) / w);
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
    alloc(0.5 * (lo + hi))
}

/// Refines the amplitudes of an AS-I solution with its rotation held fixed,
/// alternating between a concave power problem at fixed per-stream power
/// ratios `θ` and recomputing `θ`. Never returns less than the input WSR.
pub fn approx_solution_2_with(
    grams: &ChannelGrams,
    p_t: f64,
    alpha: f64,
    as1: &WsrSolution,
    opts: &As2Options,
) -> Result<WsrSolution> {
    check_inputs(p_t, alpha)?;
    let k = &as1.cfg.k;
    let (c_a, c_b) = grams.costs(k);
    let n = k.nrows();
    let fallback_theta = as1.cfg.gamma.map_or(0.5, |g| 1.0 / (1.0 + g * g));
    let mut theta: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (as1.cfg.psi_a[i].powi(2), as1.cfg.psi_b[i].powi(2));
            if a + b > 0.0 {
                a / (a + b)
            } else {
                fallback_theta
            }
        })
        .collect();

    let mut best = WsrSolution {
        method: Method::As2,
        ..as1.clone()
    };
    let mut prev = as1.wsr;
    for _ in 0..opts.max_rounds {
        let (a, b) = fixed_ratio_powers(&theta, &c_a, &c_b, alpha, p_t);
        let cfg = PrecoderConfig {
            k: k.clone(),
            psi_a: DVector::from_iterator(n, a.iter().map(|v| v.sqrt())),
            psi_b: DVector::from_iterator(n, b.iter().map(|v| v.sqrt())),
            gamma: as1.cfg.gamma,
        };
        let cand = WsrSolution::evaluate(cfg, alpha, Method::As2)?;
        let wsr = cand.wsr;
        if wsr > best.wsr {
            best = cand;
        }
        for i in 0..n {
            if a[i] + b[i] > 0.0 {
                theta[i] = a[i] / (a[i] + b[i]);
            }
        }
        if (wsr - prev).abs() < opts.tolerance {
            break;
        }
        prev = wsr;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, Field};
    use crate::eda::{transmit_power, uplink_rates};

    fn uplink(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let cs = generate_channel(2, 2, Field::Real, false, seed)
            .unwrap()
            .realization
            .to_real_model();
        (cs.h_ar().clone(), cs.h_br().clone())
    }

    #[test]
    fn symmetric_identity_instance() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let s = approx_solution_1(&i2, &i2, 100.0, 0.5, 0.02).unwrap();
        assert_eq!(s.cfg.gamma, Some(1.0));
        assert_eq!(s.cfg.psi_a, s.cfg.psi_b);
        // G = 2I, Σ² = (100/2)/2 = 25 per stream; each stream gives ½log₂(½ + 25).
        let per_user = 2.0 * 0.5 * (0.5f64 + 25.0).log2();
        assert!((s.wsr - per_user).abs() < 1e-12);
        assert!((s.rates.r_a - per_user).abs() < 1e-12);

        let s2 = approx_solution_2(&i2, &i2, 100.0, 0.5, &s).unwrap();
        assert!((s2.wsr - s.wsr).abs() < 1e-9);
        assert!((&s2.cfg.psi_a - &s.cfg.psi_a).amax() < 1e-6);
    }

    #[test]
    fn low_power_identity_instance_serves_one_user() {
        // At P_T = 4 the symmetric point gives 2·½log₂(1.5) ≈ 0.585 bits,
        // while sending everything to one user gives ½·2·½log₂(3) ≈ 0.79.
        let i2 = DMatrix::<f64>::identity(2, 2);
        let s = approx_solution_1(&i2, &i2, 4.0, 0.5, 0.02).unwrap();
        let symmetric = 2.0 * 0.5 * 1.5f64.log2();
        assert!(s.wsr > symmetric);
        assert_eq!(s.cfg.gamma, Some(0.02));
    }

    #[test]
    fn full_weight_on_a_picks_smallest_gamma() {
        let (a, b) = uplink(2);
        let s = approx_solution_1(&a, &b, 60.0, 1.0, 0.02).unwrap();
        assert!((s.cfg.gamma.unwrap() - 0.02).abs() < 1e-12);
        assert!(s.rates.r_b < 0.05);
        assert!(s.rates.r_a > 1.0);
    }

    #[test]
    fn as2_is_at_least_as1_and_feasible() {
        for seed in 0..30 {
            let (a, b) = uplink(seed);
            for alpha in [0.2, 0.5, 0.9] {
                let s1 = approx_solution_1(&a, &b, 63.0, alpha, 0.02).unwrap();
                let s2 = approx_solution_2(&a, &b, 63.0, alpha, &s1).unwrap();
                assert!(s2.wsr >= s1.wsr);
                assert_eq!(s2.method, Method::As2);
                for s in [&s1, &s2] {
                    let used = transmit_power(&a, &b, &s.cfg).unwrap();
                    assert!(used <= 63.0 * (1.0 + 1e-6), "seed {seed}: {used}");
                    let r = uplink_rates(&s.cfg.psi_a, &s.cfg.psi_b).unwrap();
                    assert!((r.weighted(alpha) - s.wsr).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn full_set_search_never_loses() {
        for seed in 0..10 {
            let (a, b) = uplink(seed);
            let grams = ChannelGrams::new(&a, &b).unwrap();
            let simple = approx_solution_1_with(&grams, 10.0, 0.7, &As1Options::default()).unwrap();
            let full = approx_solution_1_with(
                &grams,
                10.0,
                0.7,
                &As1Options {
                    full_set_search: true,
                    ..As1Options::default()
                },
            )
            .unwrap();
            assert!(full.wsr >= simple.wsr - 1e-12);
        }
    }

    #[test]
    fn full_set_search_is_limited() {
        let i4 = DMatrix::<f64>::identity(4, 4);
        let grams = ChannelGrams::new(&i4, &i4).unwrap();
        let opts = As1Options {
            full_set_search: true,
            ..As1Options::default()
        };
        assert!(matches!(
            approx_solution_1_with(&grams, 1.0, 0.5, &opts),
            Err(Error::Unsupported(_))
        ));
    }
}
