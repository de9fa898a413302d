//! Channel realizations of a MIMO two-way relay channel, power bookkeeping
//! and the real-valued expansion of complex models.

mod text;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, ComplexField, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::has_full_row_rank;
use crate::{Error, Result};

pub use text::{read_realization, write_realization};

pub type Complex64 = Complex<f64>;

/// Draws with a rank-deficient uplink are rejected; this many in a row is an error.
const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(Error::Domain(format!("unknown field '{other}'"))),
        }
    }
}

/// Scalar types a channel matrix can hold.
pub trait ChannelScalar: ComplexField<RealField = f64> + Copy {
    const FIELD: Field;

    /// One draw from N(0,1) (real) or CN(0,1) (complex).
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl ChannelScalar for f64 {
    const FIELD: Field = Field::Real;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl ChannelScalar for Complex64 {
    const FIELD: Field = Field::Complex;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    }
}

/// The four channel matrices of one realization.
///
/// `h_ar`, `h_br` are `n_r × n_t` (users to relay); `h_ra`, `h_rb` are
/// `n_t × n_r` (relay to users).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: ChannelScalar> {
    h_ar: DMatrix<T>,
    h_br: DMatrix<T>,
    h_ra: DMatrix<T>,
    h_rb: DMatrix<T>,
}

pub type RealChannelSet = ChannelSet<f64>;
pub type ComplexChannelSet = ChannelSet<Complex64>;

impl<T: ChannelScalar> ChannelSet<T> {
    pub fn new(
        h_ar: DMatrix<T>,
        h_br: DMatrix<T>,
        h_ra: DMatrix<T>,
        h_rb: DMatrix<T>,
    ) -> Result<Self> {
        let (n_r, n_t) = h_ar.shape();
        if n_r == 0 || n_t < n_r {
            return Err(Error::Dimension(format!(
                "need n_t >= n_r >= 1, got n_t = {n_t}, n_r = {n_r}"
            )));
        }
        if h_br.shape() != (n_r, n_t) || h_ra.shape() != (n_t, n_r) || h_rb.shape() != (n_t, n_r) {
            return Err(Error::Dimension(format!(
                "channel shapes disagree: h_ar {:?}, h_br {:?}, h_ra {:?}, h_rb {:?}",
                h_ar.shape(),
                h_br.shape(),
                h_ra.shape(),
                h_rb.shape()
            )));
        }
        let set = ChannelSet {
            h_ar,
            h_br,
            h_ra,
            h_rb,
        };
        if !set.uplink_full_rank() {
            return Err(Error::Singular("uplink channel is rank deficient".into()));
        }
        Ok(set)
    }

    pub fn h_ar(&self) -> &DMatrix<T> {
        &self.h_ar
    }

    pub fn h_br(&self) -> &DMatrix<T> {
        &self.h_br
    }

    pub fn h_ra(&self) -> &DMatrix<T> {
        &self.h_ra
    }

    pub fn h_rb(&self) -> &DMatrix<T> {
        &self.h_rb
    }

    pub fn n_t(&self) -> usize {
        self.h_ar.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h_ar.nrows()
    }

    pub fn field(&self) -> Field {
        T::FIELD
    }

    fn uplink_full_rank(&self) -> bool {
        let check = |h: &DMatrix<T>| has_full_row_rank(&expand(h));
        check(&self.h_ar) && check(&self.h_br)
    }
}

impl RealChannelSet {
    /// Channel set with all four matrices given; downlink defaults to the
    /// transposed uplink.
    pub fn reciprocal(h_ar: DMatrix<f64>, h_br: DMatrix<f64>) -> Result<Self> {
        let h_ra = h_ar.transpose();
        let h_rb = h_br.transpose();
        Self::new(h_ar, h_br, h_ra, h_rb)
    }

    /// Scales each matrix by one over the standard deviation of the noise at
    /// its receiver, so that unit-noise rate formulas apply.
    pub fn whiten(&self, pc: &PowerConfig) -> Self {
        let relay = 1.0 / pc.sigma_r2.sqrt();
        ChannelSet {
            h_ar: &self.h_ar * relay,
            h_br: &self.h_br * relay,
            h_ra: &self.h_ra / pc.sigma_a2.sqrt(),
            h_rb: &self.h_rb / pc.sigma_b2.sqrt(),
        }
    }
}

impl ComplexChannelSet {
    /// Real-valued equivalent: every `m × n` complex matrix becomes the
    /// `2m × 2n` block matrix `[[Re, −Im], [Im, Re]]`.
    pub fn to_real(&self) -> RealChannelSet {
        ChannelSet {
            h_ar: real_expansion(&self.h_ar),
            h_br: real_expansion(&self.h_br),
            h_ra: real_expansion(&self.h_ra),
            h_rb: real_expansion(&self.h_rb),
        }
    }
}

fn expand<T: ChannelScalar>(h: &DMatrix<T>) -> DMatrix<f64> {
    let (m, n) = h.shape();
    let mut out = DMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = h[(i, j)];
            let (re, im) = (z.real(), z.imaginary());
            out[(i, j)] = re;
            out[(i, j + n)] = -im;
            out[(i + m, j)] = im;
            out[(i + m, j + n)] = re;
        }
    }
    if T::FIELD == Field::Real {
        // Imaginary parts are zero; keep only the real block.
        return out.view((0, 0), (m, n)).into_owned();
    }
    out
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn real_expansion(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    expand(h)
}

/// A realization whose field is only known at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization {
    Real(RealChannelSet),
    Complex(ComplexChannelSet),
}

impl Realization {
    pub fn field(&self) -> Field {
        match self {
            Realization::Real(_) => Field::Real,
            Realization::Complex(_) => Field::Complex,
        }
    }

    pub fn n_t(&self) -> usize {
        match self {
            Realization::Real(c) => c.n_t(),
            Realization::Complex(c) => c.n_t(),
        }
    }

    pub fn n_r(&self) -> usize {
        match self {
            Realization::Real(c) => c.n_r(),
            Realization::Complex(c) => c.n_r(),
        }
    }

    /// The real-valued model used by all rate computations (complex sets are
    /// expanded, real sets are returned as is).
    pub fn to_real_model(&self) -> RealChannelSet {
        match self {
            Realization::Real(c) => c.clone(),
            Realization::Complex(c) => c.to_real(),
        }
    }
}

/// Real expansion of a complex realization; a real input is a type error.
pub fn complex_to_real(cs: &Realization) -> Result<RealChannelSet> {
    match cs {
        Realization::Complex(c) => Ok(c.to_real()),
        Realization::Real(_) => Err(Error::FieldMismatch {
            expected: "complex",
            found: "real",
        }),
    }
}

/// Outcome of [`generate_channel`]: the realization and how many
/// rank-deficient draws were rejected on the way.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub realization: Realization,
    pub redraws: u32,
}

/// The generator behind every realization: ChaCha20 seeded from a `u64`.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream for one Monte-Carlo trial: ChaCha20 seeded with the
/// master seed and switched to stream number `trial`.
///
/// The mapping depends only on `(master_seed, trial)`, so trials can run in
/// any order or on any number of workers.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

pub fn generate_channel(
    n_t: usize,
    n_r: usize,
    field: Field,
    reciprocal: bool,
    seed: u64,
) -> Result<ChannelDraw> {
    generate_channel_with(&mut seeded_rng(seed), n_t, n_r, field, reciprocal)
}

pub fn generate_channel_with<R: Rng + ?Sized>(
    rng: &mut R,
    n_t: usize,
    n_r: usize,
    field: Field,
    reciprocal: bool,
) -> Result<ChannelDraw> {
    if n_r == 0 || n_t < n_r {
        return Err(Error::Dimension(format!(
            "need n_t >= n_r >= 1, got n_t = {n_t}, n_r = {n_r}"
        )));
    }
    match field {
        Field::Real => {
            draw_set::<f64, R>(rng, n_t, n_r, reciprocal).map(|(set, redraws)| ChannelDraw {
                realization: Realization::Real(set),
                redraws,
            })
        }
        Field::Complex => {
            draw_set::<Complex64, R>(rng, n_t, n_r, reciprocal).map(|(set, redraws)| ChannelDraw {
                realization: Realization::Complex(set),
                redraws,
            })
        }
    }
}

fn draw_matrix<T: ChannelScalar, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> DMatrix<T> {
    let entries: Vec<T> = (0..rows * cols).map(|_| T::sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &entries)
}

fn draw_set<T: ChannelScalar, R: Rng + ?Sized>(
    rng: &mut R,
    n_t: usize,
    n_r: usize,
    reciprocal: bool,
) -> Result<(ChannelSet<T>, u32)> {
    for redraws in 0..MAX_REDRAWS {
        let h_ar = draw_matrix::<T, R>(rng, n_r, n_t);
        let h_br = draw_matrix::<T, R>(rng, n_r, n_t);
        let (h_ra, h_rb) = if reciprocal {
            (h_ar.transpose(), h_br.transpose())
        } else {
            (
                draw_matrix::<T, R>(rng, n_t, n_r),
                draw_matrix::<T, R>(rng, n_t, n_r),
            )
        };
        match ChannelSet::new(h_ar, h_br, h_ra, h_rb) {
            Ok(set) => return Ok((set, redraws)),
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular(format!(
        "{MAX_REDRAWS} consecutive rank-deficient draws"
    )))
}

/// Total uplink power for a per-user SNR in dB: `P_T = 2 σ_R² 10^(snr/10)`.
pub fn snr_to_power(snr_db: f64, sigma_r2: f64) -> f64 {
    2.0 * sigma_r2 * 10f64.powf(snr_db / 10.0)
}

/// Power budgets and noise variances (all linear scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub p_t: f64,
    pub p_r: f64,
    pub sigma_r2: f64,
    pub sigma_a2: f64,
    pub sigma_b2: f64,
}

impl PowerConfig {
    pub fn new(p_t: f64, p_r: f64, sigma_r2: f64, sigma_a2: f64, sigma_b2: f64) -> Result<Self> {
        let pc = PowerConfig {
            p_t,
            p_r,
            sigma_r2,
            sigma_a2,
            sigma_b2,
        };
        pc.validate()?;
        Ok(pc)
    }

    /// Unit noise everywhere.
    pub fn unit_noise(p_t: f64, p_r: f64) -> Result<Self> {
        Self::new(p_t, p_r, 1.0, 1.0, 1.0)
    }

    /// Unit noise, `P_T` from the per-user SNR and relay SNR equal to it.
    pub fn from_snr_db(snr_db: f64) -> Self {
        let snr = 10f64.powf(snr_db / 10.0);
        PowerConfig {
            p_t: snr_to_power(snr_db, 1.0),
            p_r: snr,
            sigma_r2: 1.0,
            sigma_a2: 1.0,
            sigma_b2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_t", self.p_t),
            ("p_r", self.p_r),
            ("sigma_r2", self.sigma_r2),
            ("sigma_a2", self.sigma_a2),
            ("sigma_b2", self.sigma_b2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.p_t / (2.0 * self.sigma_r2)).log10()
    }

    /// Configuration of the real-valued equivalent of a complex model:
    /// circularly-symmetric noise of variance σ² puts σ²/2 on each real
    /// dimension while the power budgets stay the same.
    pub fn real_equivalent(&self) -> Self {
        PowerConfig {
            sigma_r2: self.sigma_r2 / 2.0,
            sigma_a2: self.sigma_a2 / 2.0,
            sigma_b2: self.sigma_b2 / 2.0,
            ..*self
        }
    }
}

/// Per-user rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePair {
    pub r_a: f64,
    pub r_b: f64,
}

impl RatePair {
    pub const ZERO: RatePair = RatePair { r_a: 0.0, r_b: 0.0 };

    pub fn new(r_a: f64, r_b: f64) -> Result<Self> {
        if !(r_a >= 0.0 && r_b >= 0.0) {
            return Err(Error::Domain(format!("negative rate pair ({r_a}, {r_b})")));
        }
        Ok(RatePair { r_a, r_b })
    }

    pub fn sum(&self) -> f64 {
        self.r_a + self.r_b
    }

    pub fn weighted(&self, alpha: f64) -> f64 {
        alpha * self.r_a + (1.0 - alpha) * self.r_b
    }

    pub fn min(&self, other: &RatePair) -> RatePair {
        RatePair {
            r_a: self.r_a.min(other.r_a),
            r_b: self.r_b.min(other.r_b),
        }
    }

    pub fn scale(&self, factor: f64) -> RatePair {
        RatePair {
            r_a: self.r_a * factor,
            r_b: self.r_b * factor,
        }
    }
}
