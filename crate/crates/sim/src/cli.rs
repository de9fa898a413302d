//! The `edapnc` command line.
//!
//! Exit codes: 0 on success, 1 on solver or I/O failure, 2 on usage or
//! configuration errors, 3 when `--strict` is set and a solver warned.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edapnc::benchmarks::Scheme;
use edapnc::capacity::optimize_relay_covariance;
use edapnc::channel::{generate_channel, read_realization, write_realization, Field, Realization};
use edapnc::eda::{alignment_residual, precoders, transmit_power};
use edapnc::optimizers::{
    approx_solution_1_with, approx_solution_2_with, As1Options, As2Options, ChannelGrams,
};
use nalgebra::{DMatrix, DVector};

use crate::output::{metadata, write_curve_csv, write_gap_csv, write_to};
use crate::runner::{
    evaluate_schemes, power_config, run_asymptotic_gap, run_rate_region, run_sum_rate_curve,
    EvalOptions, RunSummary,
};
use crate::scenario::Scenario;
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(
    name = "edapnc",
    version,
    about = "EDA-PNC rate simulations for MIMO two-way relay channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean sum rates at α = ½ over an SNR grid.
    SumRate(RunArgs),
    /// Mean rate regions over a weight grid, one block per SNR.
    Region {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated weights in [0, 1].
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Gap between the upper bound and EDA-PNC as the user antenna count grows.
    Asymptotic {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated user antenna counts.
        #[arg(long = "nt-list", value_delimiter = ',')]
        nt_list: Option<Vec<usize>>,
    },
    /// Full diagnostic dump for one channel realization.
    Single(SingleArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file (TOML). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    field: Option<Field>,
    /// Comma-separated SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// AS-I gamma grid step.
    #[arg(long)]
    delta: Option<f64>,
    /// Use the transposed uplink channels for the downlink.
    #[arg(long)]
    reciprocal: bool,
    /// Output CSV (stdout if absent). Relative paths go under $EDAPNC_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Exit with status 3 if any solver failed to converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct SingleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    nt: usize,
    #[arg(long, default_value_t = 2)]
    nr: usize,
    #[arg(long, default_value_t = Field::Real)]
    field: Field,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    #[arg(long)]
    reciprocal: bool,
    /// Read the realization from this file instead of drawing it.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Write the realization used to this file.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("edapnc: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::SumRate(run) => {
            let sc = scenario(&run)?;
            let result = run_sum_rate_curve(&sc, run.workers)?;
            let meta = metadata("sum-rate", &sc, &result.summary);
            emit(&sc, &run, &result.summary, |w| {
                write_curve_csv(w, &meta, &result.points)
            })
        }
        Command::Region { run, alphas } => {
            let mut sc = scenario(&run)?;
            if let Some(a) = alphas {
                sc.alpha_grid = a;
            }
            sc.validate()?;
            let mut points = Vec::new();
            let mut summary = RunSummary::default();
            for &snr in &sc.snr_grid_db {
                let r = run_rate_region(&sc, snr, run.workers)?;
                summary.solver_warnings += r.summary.solver_warnings;
                summary.redraws = r.summary.redraws;
                points.extend(r.points);
            }
            let meta = metadata("region", &sc, &summary);
            emit(&sc, &run, &summary, |w| write_curve_csv(w, &meta, &points))
        }
        Command::Asymptotic { run, nt_list } => {
            let mut sc = scenario(&run)?;
            if let Some(list) = nt_list {
                sc.n_t_list = list;
            }
            sc.validate()?;
            let result = run_asymptotic_gap(&sc, run.workers)?;
            let meta = metadata("asymptotic", &sc, &result.summary);
            emit(&sc, &run, &result.summary, |w| {
                write_gap_csv(w, &meta, &result.rows)
            })
        }
        Command::Single(args) => {
            let (report, warnings) = single_report(&args)?;
            print!("{report}");
            if args.strict && warnings > 0 {
                return Err(HarnessError::Strict(warnings));
            }
            Ok(())
        }
    }
}

/// Scenario from the config file (if any) with flag overrides applied.
fn scenario(run: &RunArgs) -> Result<Scenario, HarnessError> {
    let mut sc = match &run.config {
        Some(path) => Scenario::load(path)?,
        None => {
            let missing = |flag: &str| {
                HarnessError::Config(format!("--{flag} is required when no --config is given"))
            };
            Scenario::new(
                run.nt.ok_or_else(|| missing("nt"))?,
                run.nr.ok_or_else(|| missing("nr"))?,
                run.field.unwrap_or(Field::Real),
                run.snr.clone().ok_or_else(|| missing("snr"))?,
            )
        }
    };
    if let Some(v) = run.nt {
        sc.n_t = v;
    }
    if let Some(v) = run.nr {
        sc.n_r = v;
    }
    if let Some(v) = run.field {
        sc.field = v;
    }
    if let Some(v) = &run.snr {
        sc.snr_grid_db = v.clone();
    }
    if let Some(v) = run.trials {
        sc.trials = v;
    }
    if let Some(v) = run.seed {
        sc.seed = v;
    }
    if let Some(v) = &run.schemes {
        sc.schemes = v.clone();
    }
    if let Some(v) = run.delta {
        sc.delta = v;
    }
    if run.reciprocal {
        sc.reciprocal = true;
    }
    if let Some(v) = &run.out {
        sc.output_path = Some(v.clone());
    }
    sc.validate()?;
    Ok(sc)
}

fn emit<F>(sc: &Scenario, run: &RunArgs, summary: &RunSummary, write: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut dyn std::io::Write) -> Result<(), HarnessError>,
{
    let written = write_to(sc.output_path.as_deref(), write)?;
    if let Some(p) = written {
        eprintln!("wrote {}", p.display());
    }
    eprintln!(
        "solver warnings: {} (channel redraws: {})",
        summary.solver_warnings, summary.redraws
    );
    if run.strict && summary.solver_warnings > 0 {
        return Err(HarnessError::Strict(summary.solver_warnings));
    }
    Ok(())
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(s, "  [{}]", row.join(" "));
    }
    s
}

fn fmt_vector(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", items.join(", "))
}

fn read_channel(path: &Path) -> Result<Realization, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::Config(format!("cannot read channel file {}: {e}", path.display()))
    })?;
    read_realization(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Text report for one realization and the number of solver warnings.
fn single_report(args: &SingleArgs) -> Result<(String, usize), HarnessError> {
    if !(0.0..=1.0).contains(&args.alpha) {
        return Err(HarnessError::Config(format!(
            "--alpha must lie in [0, 1], got {}",
            args.alpha
        )));
    }
    if !(args.delta > 0.0 && args.delta <= 1.0) {
        return Err(HarnessError::Config(format!(
            "--delta must lie in (0, 1], got {}",
            args.delta
        )));
    }
    let (realization, redraws) = match &args.channel {
        Some(path) => (read_channel(path)?, 0),
        None => {
            if args.nr == 0 || args.nt < args.nr {
                return Err(HarnessError::Config(format!(
                    "need nt >= nr >= 1, got nt = {}, nr = {}",
                    args.nt, args.nr
                )));
            }
            let d = generate_channel(args.nt, args.nr, args.field, args.reciprocal, args.seed)?;
            (d.realization, d.redraws)
        }
    };
    if let Some(path) = &args.export {
        let path = crate::output::resolve_output_path(path);
        std::fs::write(&path, write_realization(&realization)).map_err(|source| {
            HarnessError::Io {
                path: path.clone(),
                source,
            }
        })?;
    }
    let field = realization.field();
    let cs = realization.to_real_model();
    let pc = power_config(field, args.snr);
    let alpha = args.alpha;

    let mut schemes = vec![Scheme::CapacityUb];
    if cs.n_r() == 2 {
        schemes.push(Scheme::EdaExhaustive);
    }
    schemes.extend([
        Scheme::EdaAs1,
        Scheme::EdaAs2,
        Scheme::NaiveEda,
        Scheme::Dfnc,
    ]);
    let opts = EvalOptions {
        delta: args.delta,
        ..EvalOptions::default()
    };
    let rates = evaluate_schemes(&cs, &pc, alpha, &schemes, &opts)?;

    // AS-II configuration on the whitened channels, as the solvers see them.
    let w = cs.whiten(&pc);
    let grams = ChannelGrams::new(w.h_ar(), w.h_br())?;
    let as1_opts = As1Options {
        delta: args.delta,
        ..As1Options::default()
    };
    let as1 = approx_solution_1_with(&grams, pc.p_t, alpha, &as1_opts)?;
    let as2 = approx_solution_2_with(&grams, pc.p_t, alpha, &as1, &As2Options::default())?;
    let cfg = &as2.cfg;
    let f = precoders(&w, cfg)?;
    let residual = alignment_residual(w.h_ar(), &cfg.k, &f.f_a, &cfg.psi_a)?
        .max(alignment_residual(w.h_br(), &cfg.k, &f.f_b, &cfg.psi_b)?);
    let used = transmit_power(w.h_ar(), w.h_br(), cfg)?;
    let k_inv = cfg
        .k
        .clone()
        .try_inverse()
        .ok_or_else(|| edapnc::Error::Singular("rotation matrix".into()))?;
    let rotation_residual = (&k_inv * k_inv.transpose())
        .diagonal()
        .iter()
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max);
    let relay = optimize_relay_covariance(w.h_ra(), w.h_rb(), pc.p_r, alpha)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "realization: n_t = {} n_r = {} field = {}",
        realization.n_t(),
        realization.n_r(),
        field
    );
    match &args.channel {
        Some(p) => {
            let _ = writeln!(s, "source: {}", p.display());
        }
        None => {
            let _ = writeln!(s, "source: seed {} (redraws {})", args.seed, redraws);
        }
    }
    let _ = writeln!(
        s,
        "snr: {} dB  alpha: {}  P_T: {:.6}  P_R: {:.6}  noise per real dimension: {}",
        args.snr, alpha, pc.p_t, pc.p_r, pc.sigma_r2
    );
    let _ = writeln!(s, "rates (bits per channel use):");
    for (scheme, r) in schemes.iter().zip(&rates.rates) {
        let _ = writeln!(
            s,
            "  {:<15} r_a = {:.6}  r_b = {:.6}  sum = {:.6}",
            scheme.as_str(),
            r.r_a,
            r.r_b,
            r.sum()
        );
    }
    let _ = writeln!(s, "eda_as2 configuration:");
    let _ = writeln!(
        s,
        "  gamma: {}",
        cfg.gamma.map_or("-".to_string(), |g| format!("{g:.6}"))
    );
    let _ = write!(s, "  K:\n{}", fmt_matrix(&cfg.k));
    let _ = writeln!(s, "  psi_a: {}", fmt_vector(&cfg.psi_a));
    let _ = writeln!(s, "  psi_b: {}", fmt_vector(&cfg.psi_b));
    let _ = writeln!(
        s,
        "  uplink rates: r_a = {:.6}  r_b = {:.6}",
        as2.rates.r_a, as2.rates.r_b
    );
    let _ = write!(s, "  F_A:\n{}", fmt_matrix(&f.f_a));
    let _ = write!(s, "  F_B:\n{}", fmt_matrix(&f.f_b));
    let _ = writeln!(s, "alignment residual: {residual:.3e}");
    let _ = writeln!(s, "rotation residual: {rotation_residual:.3e}");
    let _ = writeln!(
        s,
        "transmit power: {:.9} of {:.9} (residual {:.3e})",
        used,
        pc.p_t,
        pc.p_t - used
    );
    let _ = writeln!(
        s,
        "relay covariance: trace {:.9} of {:.9} (residual {:.3e}), {} iterations, converged {}",
        relay.q_r.trace(),
        pc.p_r,
        pc.p_r - relay.q_r.trace(),
        relay.report.iterations,
        relay.converged()
    );
    let _ = writeln!(s, "solver warnings: {}", rates.warnings);
    Ok((s, rates.warnings))
}
