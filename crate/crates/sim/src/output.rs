//! CSV emission. Every file starts with `#` metadata lines, then a header
//! row. Nothing run-dependent beyond the results goes in (no timestamps, no
//! worker count), so identical inputs give identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use edapnc::capacity::{PG_MAX_ITERATIONS, PG_TOLERANCE};
use edapnc::optimizers::As2Options;
use serde::Serialize;

use crate::runner::{CurvePoint, GapRow, RunSummary};
use crate::scenario::Scenario;
use crate::HarnessError;

/// Directory that relative output paths are resolved against.
pub const OUT_DIR_ENV: &str = "EDAPNC_OUT_DIR";

pub const CURVE_COLUMNS: [&str; 8] = [
    "snr_db", "scheme", "alpha", "mean_r_a", "mean_r_b", "mean_sum", "stderr", "trials",
];

pub const GAP_COLUMNS: [&str; 8] = [
    "n_t",
    "n_r",
    "snr_db",
    "mean_gap",
    "gap_stderr",
    "uniform_gap",
    "uniform_stderr",
    "trials",
];

#[derive(Serialize)]
struct CurveRow<'a> {
    snr_db: f64,
    scheme: &'a str,
    alpha: f64,
    mean_r_a: f64,
    mean_r_b: f64,
    mean_sum: f64,
    stderr: f64,
    trials: usize,
}

/// Joins a relative `path` onto `$EDAPNC_OUT_DIR` when that is set.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Metadata block shared by all outputs.
pub fn metadata(command: &str, sc: &Scenario, summary: &RunSummary) -> Vec<String> {
    let as2 = As2Options::default();
    let grid = sc.grid_spec();
    let n_t = if sc.n_t_list.is_empty() || command != "asymptotic" {
        sc.n_t.to_string()
    } else {
        sc.n_t_list
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    vec![
        format!("edapnc-sim {}", env!("CARGO_PKG_VERSION")),
        format!("command: {command}"),
        format!(
            "seed: {} trials: {} n_t: {} n_r: {} field: {} reciprocal: {}",
            sc.seed, sc.trials, n_t, sc.n_r, sc.field, sc.reciprocal
        ),
        format!(
            "snr_grid_db: {} alpha_grid: {}",
            list(&sc.snr_grid_db),
            list(&sc.alpha_grid)
        ),
        format!(
            "delta: {} exhaustive grid: {} angles x {} powers, refine {}x on {} cells, polish {}",
            sc.delta,
            grid.angle_steps,
            grid.power_steps,
            grid.refine_factor,
            grid.refine_cells,
            grid.polish
        ),
        format!(
            "tolerances: projected gradient {PG_TOLERANCE:e} bits or {PG_MAX_ITERATIONS} iterations, \
             as2 {:e} or {} rounds",
            as2.tolerance, as2.max_rounds
        ),
        format!(
            "solver warnings: {} channel redraws: {}",
            summary.solver_warnings, summary.redraws
        ),
    ]
}

fn write_meta<W: Write>(w: &mut W, meta: &[String]) -> std::io::Result<()> {
    for line in meta {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

pub fn write_curve_csv<W: Write>(
    mut w: W,
    meta: &[String],
    points: &[CurvePoint],
) -> Result<(), HarnessError> {
    write_meta(&mut w, meta).map_err(csv::Error::from)?;
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(CurveRow {
            snr_db: p.snr_db,
            scheme: p.scheme.as_str(),
            alpha: p.alpha,
            mean_r_a: p.mean_r_a,
            mean_r_b: p.mean_r_b,
            mean_sum: p.mean_sum,
            stderr: p.stderr,
            trials: p.trials,
        })?;
    }
    if points.is_empty() {
        out.write_record(CURVE_COLUMNS)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_gap_csv<W: Write>(
    mut w: W,
    meta: &[String],
    rows: &[GapRow],
) -> Result<(), HarnessError> {
    write_meta(&mut w, meta).map_err(csv::Error::from)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(GAP_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.n_t.to_string(),
            r.n_r.to_string(),
            r.snr_db.to_string(),
            r.mean_gap.to_string(),
            r.gap_stderr.to_string(),
            r.uniform_gap.to_string(),
            r.uniform_stderr.to_string(),
            r.trials.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes through `emit` to `path`, or to stdout when there is no path.
pub fn write_to<F>(path: Option<&Path>, emit: F) -> Result<Option<PathBuf>, HarnessError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), HarnessError>,
{
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)?;
            Ok(None)
        }
        Some(p) => {
            let p = resolve_output_path(p);
            let io_err = |source| HarnessError::Io {
                path: p.clone(),
                source,
            };
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io_err)?;
            }
            let file = std::fs::File::create(&p).map_err(io_err)?;
            let mut buf = std::io::BufWriter::new(file);
            emit(&mut buf)?;
            buf.flush().map_err(io_err)?;
            Ok(Some(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use edapnc::benchmarks::Scheme;
    use edapnc::channel::Field;

    #[test]
    fn curve_csv_layout() {
        let sc = Scenario::new(2, 2, Field::Real, vec![15.0]);
        let meta = metadata("sum-rate", &sc, &RunSummary::default());
        let p = CurvePoint {
            snr_db: 15.0,
            scheme: Scheme::EdaAs2,
            alpha: 0.5,
            mean_r_a: 1.25,
            mean_r_b: 2.0,
            mean_sum: 3.25,
            stderr: 0.01,
            trials: 4,
        };
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &meta, &[p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], CURVE_COLUMNS.join(","));
        assert_eq!(lines[1], "15.0,eda_as2,0.5,1.25,2.0,3.25,0.01,4");
        assert!(text.starts_with("# edapnc-sim "));
        assert!(text.contains("seed: 0"));
    }

    #[test]
    fn empty_curve_still_has_header() {
        let sc = Scenario::new(2, 2, Field::Real, vec![15.0]);
        let mut buf = Vec::new();
        write_curve_csv(
            &mut buf,
            &metadata("region", &sc, &RunSummary::default()),
            &[],
        )
        .unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .ends_with("snr_db,scheme,alpha,mean_r_a,mean_r_b,mean_sum,stderr,trials\n"));
    }
}
