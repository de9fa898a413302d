//! Simulation scenarios read from TOML.
//!
//! ```toml
//! n_t = 2
//! n_r = 2
//! field = "real"            # or "complex"
//! reciprocal = false
//! snr_grid_db = [0, 15, 20, 25, 30]
//! trials = 1000
//! seed = 1
//! schemes = ["capacity_ub", "eda_exhaustive", "dfnc"]
//! alpha_grid = [0.0, 0.25, 0.5, 0.75, 1.0]   # region runs only
//! delta = 0.02                               # AS-I gamma step
//! angle_steps = 64                           # exhaustive search grid
//! power_steps = 16
//! n_t_list = [2, 3, 4]                       # asymptotic runs only
//! output_path = "fig3.csv"
//! ```

use std::path::{Path, PathBuf};

use edapnc::benchmarks::Scheme;
use edapnc::channel::Field;
use edapnc::optimizers::GridSpec;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

fn default_field() -> Field {
    Field::Real
}

fn default_trials() -> usize {
    1000
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::CapacityUb, Scheme::EdaAs2, Scheme::Dfnc]
}

fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn default_delta() -> f64 {
    0.02
}

fn default_angle_steps() -> usize {
    64
}

fn default_power_steps() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_t: usize,
    pub n_r: usize,
    #[serde(default = "default_field")]
    pub field: Field,
    #[serde(default)]
    pub reciprocal: bool,
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_angle_steps")]
    pub angle_steps: usize,
    #[serde(default = "default_power_steps")]
    pub power_steps: usize,
    #[serde(default)]
    pub n_t_list: Vec<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl Scenario {
    /// Scenario with defaults for everything but the dimensions and SNRs.
    pub fn new(n_t: usize, n_r: usize, field: Field, snr_grid_db: Vec<f64>) -> Self {
        Scenario {
            n_t,
            n_r,
            field,
            reciprocal: false,
            snr_grid_db,
            trials: default_trials(),
            seed: 0,
            schemes: default_schemes(),
            alpha_grid: default_alpha_grid(),
            delta: default_delta(),
            angle_steps: default_angle_steps(),
            power_steps: default_power_steps(),
            n_t_list: Vec::new(),
            output_path: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario always serializes")
    }

    /// Relay antennas of the real-valued model the solvers work on.
    pub fn real_n_r(&self) -> usize {
        match self.field {
            Field::Real => self.n_r,
            Field::Complex => 2 * self.n_r,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            angle_steps: self.angle_steps,
            power_steps: self.power_steps,
            ..GridSpec::default()
        }
    }

    /// Checks everything that can be checked before any trial runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_r == 0 || self.n_t < self.n_r {
            return bad(format!(
                "need n_t >= n_r >= 1, got n_t = {}, n_r = {}",
                self.n_t, self.n_r
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db must not be empty".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db entries must be finite".into());
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if self.alpha_grid.is_empty() {
            return bad("alpha_grid must not be empty".into());
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alpha_grid entries must lie in [0, 1]".into());
        }
        if self.alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("alpha_grid must be strictly increasing".into());
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if self.angle_steps < 2 || self.power_steps < 1 {
            return bad("angle_steps must be at least 2 and power_steps at least 1".into());
        }
        if self.schemes.contains(&Scheme::EdaExhaustive) && self.real_n_r() != 2 {
            return bad(format!(
                "eda_exhaustive needs two real relay dimensions (n_r = 2 real or n_r = 1 complex); \
                 this scenario has {}",
                self.real_n_r()
            ));
        }
        if self.n_t_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_t_list must be strictly increasing".into());
        }
        if self.n_t_list.iter().any(|&n| n < self.n_r) {
            return bad("every n_t_list entry must be at least n_r".into());
        }
        Ok(())
    }
}
