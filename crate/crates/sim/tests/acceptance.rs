//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Takes several minutes on one core.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{eigenvalues_ascending, gaussian, grid_oracle_2x2, orthogonal, psd, rng};
use edapnc::benchmarks::Scheme;
use edapnc::capacity::{mimo_rate, water_filling_covariance};
use edapnc::channel::{real_expansion, Complex64, Field, PowerConfig};
use edapnc::eda::{
    alignment_residual, eda_precoder, rotation_from_inverse_rows, validate_rotation,
};
use edapnc::linalg::has_full_row_rank;
use edapnc::optimizers::{
    approx_solution_1, approx_solution_2, exhaustive_search_2d, waterfill_sigma, ChannelGrams,
    GridSpec, StreamSet,
};
use edapnc_sim::runner::draw_trial;
use edapnc_sim::{run_asymptotic_gap, run_sum_rate_curve, CurvePoint, Scenario};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 20_240_601;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, what: &str, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} criterion {id}: {what} [{detail}]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn mean_sum(points: &[CurvePoint], snr: f64, scheme: Scheme) -> f64 {
    points
        .iter()
        .find(|p| p.snr_db == snr && p.scheme == scheme)
        .expect("row present")
        .mean_sum
}

fn curves(report: &mut Report) {
    let t = Instant::now();
    let mut sc = Scenario::new(2, 2, Field::Real, vec![0.0, 15.0, 20.0, 25.0, 30.0]);
    sc.trials = 1000;
    sc.seed = SEED;
    sc.schemes = vec![Scheme::CapacityUb, Scheme::EdaExhaustive, Scheme::Dfnc];
    let run = run_sum_rate_curve(&sc, None).expect("sum-rate run");
    let p = &run.points;
    let ub = |s| mean_sum(p, s, Scheme::CapacityUb);
    let eda = |s| mean_sum(p, s, Scheme::EdaExhaustive);
    let df = |s| mean_sum(p, s, Scheme::Dfnc);
    println!(
        "  2x2 real, 1000 trials, {:.0} s, solver warnings {}",
        t.elapsed().as_secs_f64(),
        run.summary.solver_warnings
    );
    for s in [0.0, 15.0, 20.0, 25.0, 30.0] {
        println!(
            "  {s:>4} dB: ub {:.4}  eda {:.4}  dfnc {:.4}",
            ub(s),
            eda(s),
            df(s)
        );
    }

    let gaps: Vec<f64> = [15.0, 20.0, 25.0].iter().map(|&s| ub(s) - eda(s)).collect();
    report.line(
        "1",
        gaps.iter().all(|&g| g <= 0.45),
        "mean UB minus exhaustive EDA gap <= 0.45 bit at 15/20/25 dB",
        format!("gaps {:.4} {:.4} {:.4}", gaps[0], gaps[1], gaps[2]),
    );

    let slope_eda = eda(30.0) - eda(20.0);
    let slope_df = df(30.0) - df(20.0);
    report.line(
        "2",
        slope_df <= 0.7 * slope_eda,
        "DF-NC slope 20-30 dB <= 0.7 x EDA slope",
        format!(
            "dfnc {:.4}, eda {:.4} bits per 10 dB, ratio {:.3}",
            slope_df,
            slope_eda,
            slope_df / slope_eda
        ),
    );

    report.line(
        "3",
        df(0.0) >= eda(0.0),
        "at 0 dB mean DF-NC sum rate >= mean EDA sum rate",
        format!("dfnc {:.4}, eda {:.4}", df(0.0), eda(0.0)),
    );
}

fn asymptotic(report: &mut Report) {
    let mut sc = Scenario::new(2, 2, Field::Real, vec![15.0]);
    sc.n_t_list = vec![2, 3, 4];
    sc.trials = 500;
    sc.seed = SEED;
    let run = run_asymptotic_gap(&sc, None).expect("asymptotic run");
    let gaps: Vec<f64> = run.rows.iter().map(|r| r.mean_gap).collect();
    report.line(
        "4",
        gaps.windows(2).all(|w| w[1] < w[0]),
        "mean UB gap strictly decreasing in n_T = 2, 3, 4 at 15 dB",
        format!("gaps {:.4} {:.4} {:.4}", gaps[0], gaps[1], gaps[2]),
    );
}

fn ordering(report: &mut Report) {
    let pc = PowerConfig::from_snr_db(15.0);
    let mut r = rng(SEED);
    let (mut as_viol, mut ex_viol, mut worst) = (0, 0, f64::NEG_INFINITY);
    for trial in 0..500u64 {
        let n_t = 2 + (trial % 2) as usize;
        let (cs, _) = draw_trial(n_t, 2, Field::Real, false, SEED + 1, trial).unwrap();
        let alpha: f64 = r.random_range(0.0..=1.0);
        let a1 = approx_solution_1(cs.h_ar(), cs.h_br(), pc.p_t, alpha, 0.02).unwrap();
        let a2 = approx_solution_2(cs.h_ar(), cs.h_br(), pc.p_t, alpha, &a1).unwrap();
        let ex = exhaustive_search_2d(cs.h_ar(), cs.h_br(), pc.p_t, alpha, &GridSpec::default())
            .unwrap();
        as_viol += usize::from(a2.wsr < a1.wsr);
        ex_viol += usize::from(ex.wsr < a2.wsr - 5e-3);
        worst = worst.max(a2.wsr - ex.wsr);
    }
    report.line(
        "5",
        as_viol == 0 && ex_viol == 0,
        "AS-II >= AS-I and exhaustive >= AS-II - 5e-3 on 500 instances at 15 dB",
        format!(
            "AS violations {as_viol}, exhaustive violations {ex_viol}, max AS-II excess {worst:.2e}"
        ),
    );
}

fn naive_dominance(report: &mut Report) {
    let mut sc = Scenario::new(4, 4, Field::Complex, vec![15.0]);
    sc.trials = 100;
    sc.seed = SEED;
    sc.schemes = vec![Scheme::EdaAs2, Scheme::NaiveEda];
    let run = run_sum_rate_curve(&sc, None).expect("complex run");
    let (eda, naive) = (
        mean_sum(&run.points, 15.0, Scheme::EdaAs2),
        mean_sum(&run.points, 15.0, Scheme::NaiveEda),
    );
    report.line(
        "6",
        eda > naive,
        "4x4 complex at 15 dB: mean AS-II sum rate > mean naive EDA",
        format!("as2 {eda:.4}, naive {naive:.4}"),
    );
}

fn random_rotation(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    loop {
        if let Ok(k) = rotation_from_inverse_rows(&gaussian(r, n, n)) {
            if validate_rotation(&k) && k.amax() < 1e3 {
                return k;
            }
        }
    }
}

fn properties(report: &mut Report) {
    let mut r = rng(SEED ^ 7);

    // (a) alignment
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 1000 {
        let n_r = r.random_range(1..=4);
        let n_t = n_r + r.random_range(0..3);
        let h = gaussian(&mut r, n_r, n_t);
        if !has_full_row_rank(&h) {
            continue;
        }
        let k = random_rotation(&mut r, n_r);
        let psi = DVector::from_fn(n_r, |_, _| r.random_range(0.0..10.0));
        let f = eda_precoder(&h, &k, &psi).unwrap();
        worst = worst.max(alignment_residual(&h, &k, &f, &psi).unwrap());
        count += 1;
    }
    report.line(
        "7a",
        worst < 1e-8,
        "alignment residual < 1e-8 on 1000 instances",
        format!("max {worst:.2e}"),
    );

    // (b) sampled optimality of the eigenvector rotation
    let mut violations = 0;
    for inst in 0..100u64 {
        let n_r = 2 + (inst % 3) as usize;
        let (cs, _) = draw_trial(n_r + 1, n_r, Field::Real, false, SEED + 2, inst).unwrap();
        let grams = ChannelGrams::new(cs.h_ar(), cs.h_br()).unwrap();
        let gamma = r.random_range(0.05..5.0);
        let g = grams.g(gamma);
        let d = grams.decompose(gamma);
        let mut s2: Vec<f64> = (0..n_r).map(|_| r.random_range(0.0..10.0)).collect();
        s2.sort_by(|a, b| b.total_cmp(a));
        let s2 = DMatrix::from_diagonal(&DVector::from_vec(s2));
        let best = (DMatrix::from_diagonal(&d.lambda_g) * &s2).trace();
        for _ in 0..100 {
            let k = orthogonal(&mut r, n_r);
            if (&g * &k * &s2 * k.transpose()).trace() < best - 1e-9 {
                violations += 1;
            }
        }
    }
    report.line(
        "7b",
        violations == 0,
        "no sampled rotation beats the eigenvector rotation (10^4 rotations)",
        format!("violations {violations}"),
    );

    // (c) water-filling KKT and budget equality
    let (mut kkt, mut budget): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let n = r.random_range(1..=4);
        let lambda = DVector::from_fn(n, |_, _| r.random_range(0.05..20.0));
        let gamma = r.random_range(0.05..5.0);
        let alpha = r.random_range(0.0..=1.0);
        let p_t = 10f64.powf(r.random_range(-1.0..3.0));
        let all = StreamSet::all(n);
        let sol = waterfill_sigma(&lambda, gamma, alpha, p_t, all, all).unwrap();
        let c = 1.0 / (1.0 + gamma * gamma);
        let spent: f64 = (0..n).map(|i| lambda[i] * sol.sigma[i].powi(2)).sum();
        budget = budget.max((spent - p_t).abs() / p_t);
        let gain = |i: usize| 1.0 / (c + sol.sigma[i].powi(2)) / lambda[i];
        let active: Vec<usize> = (0..n).filter(|&i| sol.sigma[i] > 0.0).collect();
        let mu = gain(active[0]);
        for i in 0..n {
            let excess = if active.contains(&i) {
                (gain(i) - mu).abs() / mu
            } else {
                ((gain(i) - mu) / mu).max(0.0)
            };
            kkt = kkt.max(excess);
        }
    }
    report.line(
        "7c",
        kkt <= 1e-6 && budget <= 1e-8,
        "KKT residual <= 1e-6 and budget equality <= 1e-8 relative (1000 instances)",
        format!("kkt {kkt:.2e}, budget {budget:.2e}"),
    );

    // (d) trace bounds
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = r.random_range(1..=4);
        let (ta, tb) = (r.random_range(0.1..10.0), r.random_range(0.1..10.0));
        let m = psd(&mut r, n, ta);
        let nn = psd(&mut r, n, tb);
        let (lm, ln) = (eigenvalues_ascending(&m), eigenvalues_ascending(&nn));
        let same: f64 = lm.iter().zip(&ln).map(|(a, b)| a * b).sum();
        let reversed: f64 = lm.iter().zip(ln.iter().rev()).map(|(a, b)| a * b).sum();
        let t = (&m * &nn).trace();
        let tol = 1e-9 * same.max(1.0);
        if t < reversed - tol || t > same + tol {
            bad += 1;
        }
    }
    report.line(
        "7d",
        bad == 0,
        "Tr(MN) >= reversed-order eigenvalue sum (and <= same-order sum) on 10^4 PSD pairs",
        format!("violations {bad}"),
    );

    // (e) water-filling against a grid oracle
    let mut worst_gap: f64 = 0.0;
    let mut below = 0;
    for k in 0..100 {
        let h = gaussian(&mut r, 2, 2);
        let total = [0.5, 5.0, 50.0][k % 3];
        let wf = mimo_rate(&h, &water_filling_covariance(&h, total)).unwrap();
        let (grid, refined) = grid_oracle_2x2(&h, total);
        worst_gap = worst_gap.max((wf - grid).abs());
        below += usize::from(wf < refined - 1e-9);
    }
    report.line(
        "7e",
        worst_gap <= 1e-3 && below == 0,
        "water-filling within 1e-3 bit of the grid oracle on 100 instances",
        format!("max gap {worst_gap:.2e}, oracle wins {below}"),
    );

    // (f) complex log-det = half the real expansion
    let mut worst_id: f64 = 0.0;
    for _ in 0..100 {
        let cg = |r: &mut rand_chacha::ChaCha8Rng| {
            DMatrix::<Complex64>::from_fn(2, 2, |_, _| {
                Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal))
            })
        };
        let h = cg(&mut r);
        let a = cg(&mut r);
        let q = &a * a.adjoint();
        let det = (DMatrix::<Complex64>::identity(2, 2) + &h * &q * h.adjoint())
            .lu()
            .determinant();
        let real = mimo_rate(&real_expansion(&h), &real_expansion(&q)).unwrap();
        worst_id = worst_id.max((det.re.log2() - real).abs());
    }
    report.line(
        "7f",
        worst_id <= 1e-9,
        "complex log-det equals half the real-expansion log-det (100 instances)",
        format!("max error {worst_id:.2e}"),
    );

    // (g) byte-identical CSV from two runs of the binary
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_edapnc"))
            .args([
                "sum-rate",
                "--nt",
                "2",
                "--nr",
                "2",
                "--snr",
                "0,20",
                "--trials",
                "20",
                "--seed",
                "5",
                "--schemes",
                "capacity_ub,eda_exhaustive,eda_as1,eda_as2,naive_eda,dfnc",
                "--workers",
                workers,
            ])
            .env_remove("EDAPNC_OUT_DIR")
            .output()
            .expect("run edapnc")
    };
    let (a, b) = (run("1"), run("2"));
    let same =
        a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    report.line(
        "7g",
        same,
        "two seeded runs (1 and 2 workers) give byte-identical CSV",
        format!("{} bytes", a.stdout.len()),
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut report = Report { failed: 0 };
    curves(&mut report);
    asymptotic(&mut report);
    ordering(&mut report);
    naive_dominance(&mut report);
    properties(&mut report);
    println!(
        "acceptance: {} failed, {:.0} s",
        report.failed,
        start.elapsed().as_secs_f64()
    );
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
