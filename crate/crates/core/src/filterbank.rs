//! Morlet filter banks: a Gaussian averaging kernel at scale `2^J` and a
//! family of zero-mean Morlet wavelets dilated by powers of two.
//!
//! Filters are sampled in space, corrected to zero mean, then stored as
//! spectra on the signal grid. After construction every wavelet is scaled by
//! one common gain so that the Littlewood–Paley sum never exceeds one, which
//! makes the wavelet-modulus propagator non-expansive.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::signal::{dft_forward, dft_inverse, Shape, Signal, Spectrum};
use crate::timefreq::centered_coord;

/// How dilated wavelets are weighted across scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `2^{-jn} psi(2^{-j} u)`: L1 norm constant across scales.
    L1,
    /// `2^{-jn/2} psi(2^{-j} u)`: L2 norm constant across scales.
    L2,
}

impl std::str::FromStr for Normalization {
    type Err = ScatterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Normalization::L1),
            "l2" => Ok(Normalization::L2),
            other => Err(ScatterError::invalid(format!(
                "unknown normalization {other:?} (expected l1 or l2)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    /// Number of dyadic scales; the averaging kernel lives at scale `2^J`.
    #[serde(rename = "J")]
    pub j: usize,
    /// Orientations per scale in 2D, wavelets per octave in 1D.
    #[serde(rename = "K")]
    pub k: usize,
    pub grid: Shape,
    /// Mother wavelet center frequency, radians per sample.
    pub xi: f64,
    /// Mother envelope width in samples; scale `j` uses `sigma * 2^j`.
    pub sigma: f64,
    /// 2D envelope aspect ratio across the wave vector (1 = isotropic).
    pub slant: f64,
    pub normalization: Normalization,
}

impl BankConfig {
    /// Defaults for a 2D bank: `xi = 3pi/4`, `sigma = 0.6`, `K = 8`.
    pub fn new_2d(j: usize, height: usize, width: usize) -> Self {
        BankConfig {
            j,
            k: 8,
            grid: Shape::D2(height, width),
            xi: 3.0 * PI / 4.0,
            sigma: DEFAULT_SIGMA_2D,
            slant: DEFAULT_SLANT,
            normalization: Normalization::L1,
        }
    }

    /// Defaults for a 1D bank: one wavelet per octave.
    pub fn new_1d(j: usize, len: usize) -> Self {
        BankConfig {
            j,
            k: 1,
            grid: Shape::D1(len),
            xi: 3.0 * PI / 4.0,
            sigma: DEFAULT_SIGMA_1D,
            slant: 1.0,
            normalization: Normalization::L1,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let extents = self.grid.extents();
        if extents.iter().any(|&n| n == 0 || !n.is_power_of_two()) {
            return Err(ScatterError::invalid(format!(
                "bank grid {} must have power-of-two sides",
                self.grid
            )));
        }
        let span = 1usize
            .checked_shl(self.j as u32)
            .filter(|&s| extents.iter().all(|&n| s <= n));
        if span.is_none() {
            return Err(ScatterError::invalid(format!(
                "2^J = 2^{} exceeds the {} grid",
                self.j, self.grid
            )));
        }
        if self.k == 0 {
            return Err(ScatterError::invalid("K must be at least 1"));
        }
        for (name, v) in [("xi", self.xi), ("sigma", self.sigma), ("slant", self.slant)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScatterError::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Envelope aspect ratio used by the default 2D bank.
pub const DEFAULT_SLANT: f64 = 1.0;

/// Mother envelope width for 2D banks. With `0.85` the highest-frequency
/// wavelets leave the grid corners nearly uncovered (B/A around 11 for
/// `J = 3` on 32x32); `0.6` keeps B/A near 2 for every `J` up to 5. The
/// price is that the `j = 0` envelope is only just resolved by the grid, so
/// the continuum scaling laws (constant L1 norm, octave spacing) hold from
/// `j = 1` on.
pub const DEFAULT_SIGMA_2D: f64 = 0.6;

/// Mother envelope width for 1D banks.
pub const DEFAULT_SIGMA_1D: f64 = 0.85;

/// One dilated, oriented wavelet held in the frequency domain. `k` is
/// 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavelet {
    pub j: usize,
    pub k: usize,
    pub spectrum: Spectrum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    config: BankConfig,
    phi: Spectrum,
    psis: Vec<Wavelet>,
    frame_bounds: (f64, f64),
    wavelet_gain: f64,
    warnings: Vec<String>,
}

impl FilterBank {
    /// Assembles a bank from precomputed spectra and measures its frame
    /// bounds. No normalization is applied.
    pub fn from_spectra(config: BankConfig, phi: Spectrum, psis: Vec<Wavelet>) -> Result<Self> {
        if phi.shape() != config.grid || psis.iter().any(|w| w.spectrum.shape() != config.grid) {
            return Err(ScatterError::invalid(format!(
                "filter spectra do not match the {} bank grid",
                config.grid
            )));
        }
        let mut bank = FilterBank {
            config,
            phi,
            psis,
            frame_bounds: (0.0, 0.0),
            wavelet_gain: 1.0,
            warnings: Vec::new(),
        };
        bank.frame_bounds = littlewood_paley(&bank);
        Ok(bank)
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn grid(&self) -> Shape {
        self.config.grid
    }

    pub fn phi(&self) -> &Spectrum {
        &self.phi
    }

    /// The averaging kernel in space.
    pub fn phi_spatial(&self) -> Signal {
        dft_inverse(&self.phi)
    }

    pub fn wavelets(&self) -> &[Wavelet] {
        &self.psis
    }

    pub fn psi(&self, j: usize, k: usize) -> Option<&Spectrum> {
        self.psis
            .iter()
            .find(|w| w.j == j && w.k == k)
            .map(|w| &w.spectrum)
    }

    /// Littlewood–Paley bounds `(A, B)` measured after normalization.
    pub fn frame_bounds(&self) -> (f64, f64) {
        self.frame_bounds
    }

    /// Common factor applied to every wavelet by the normalization step.
    pub fn wavelet_gain(&self) -> f64 {
        self.wavelet_gain
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn set_wavelet_gain(&mut self, gain: f64) {
        self.wavelet_gain = gain;
    }
}

/// Subtracts `beta * |psi|` with `beta = sum(psi) / sum(|psi|)`, which zeroes
/// the mean while touching the signal only where it has mass. For a raw Morlet
/// `|psi|` is exactly its Gaussian envelope.
pub fn zero_mean_correct(psi: &Signal) -> Signal {
    let mass = psi.norm_l1();
    if mass == 0.0 {
        return psi.clone();
    }
    let beta = psi.sum() / mass;
    psi.map(|v| v - beta * v.norm())
}

/// Centered coordinates `(row, col)` of every grid point, row-major. A 1D
/// grid reports `row = 0`.
fn grid_coords(shape: Shape) -> Vec<(f64, f64)> {
    let (rows, cols) = shape.rows_cols();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = if rows == 1 { 0.0 } else { centered_coord(r, rows) };
        for c in 0..cols {
            out.push((y, centered_coord(c, cols)));
        }
    }
    out
}

/// Raw (not zero-mean) Morlet on the grid. `dilation` multiplies the envelope
/// width and divides the center frequency; `theta` orients the wave vector
/// in 2D.
pub fn raw_morlet(config: &BankConfig, dilation: f64, theta: f64) -> Result<Signal> {
    let shape = config.grid;
    let sigma = config.sigma * dilation;
    let xi = config.xi / dilation;
    let dim = shape.dim() as i32;
    let amp = match config.normalization {
        Normalization::L1 => dilation.powi(-dim),
        Normalization::L2 => dilation.powf(-(dim as f64) / 2.0),
    };
    let (ct, st) = (theta.cos(), theta.sin());
    let slant = if dim == 1 { 1.0 } else { config.slant };
    let base = (2.0 * PI).powf(dim as f64 / 2.0) * config.sigma.powi(dim) / slant;
    let vals = grid_coords(shape)
        .into_iter()
        .map(|(y, x)| {
            // along / across the wave vector
            let along = ct * x + st * y;
            let across = -st * x + ct * y;
            let env = (-(along * along + slant * slant * across * across) / (2.0 * sigma * sigma)).exp();
            Complex64::from_polar(amp * env / base, xi * along)
        })
        .collect();
    Signal::new(shape, vals)
}

/// Gaussian averaging kernel of width `sigma * 2^J`, truncated to the grid
/// and normalized to unit sum.
fn gaussian_lowpass(config: &BankConfig) -> Signal {
    let width = config.sigma * (1u64 << config.j) as f64;
    let mut vals: Vec<f64> = grid_coords(config.grid)
        .into_iter()
        .map(|(y, x)| (-(x * x + y * y) / (2.0 * width * width)).exp())
        .collect();
    let total: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= total);
    Signal::from_real(config.grid, &vals).expect("grid validated")
}

fn wavelet_params(config: &BankConfig, j: usize, k: usize) -> (f64, f64) {
    let kf = (k - 1) as f64;
    match config.grid {
        Shape::D1(_) => (2f64.powf(j as f64 + kf / config.k as f64), 0.0),
        Shape::D2(..) => (2f64.powi(j as i32), kf * PI / config.k as f64),
    }
}

/// Bin index of frequency `-k` on an axis of length `n`.
fn neg_bin(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Maps each flat bin index to the flat index of its negated frequency.
fn reflection_table(shape: Shape) -> Vec<usize> {
    let (rows, cols) = shape.rows_cols();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(neg_bin(r, rows) * cols + neg_bin(c, cols));
        }
    }
    out
}

/// Per-bin Littlewood–Paley sums `(|phi|^2, wavelet sum)`, both symmetrized
/// over `omega` and `-omega` (the relevant quantity for real inputs).
fn littlewood_paley_terms(bank: &FilterBank) -> (Vec<f64>, Vec<f64>) {
    let refl = reflection_table(bank.grid());
    let n = refl.len();
    let phi = bank.phi.values();
    let low: Vec<f64> = (0..n)
        .map(|i| 0.5 * (phi[i].norm_sqr() + phi[refl[i]].norm_sqr()))
        .collect();
    let mut high = vec![0.0; n];
    for w in &bank.psis {
        let s = w.spectrum.values();
        for i in 0..n {
            high[i] += 0.5 * (s[i].norm_sqr() + s[refl[i]].norm_sqr());
        }
    }
    (low, high)
}

fn bounds_over_nonzero(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .skip(1)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        })
}

/// Littlewood–Paley frame bounds: the min and max over nonzero frequencies
/// of `|phi(w)|^2 + sum |psi(w)|^2`, each term averaged with its mirror
/// `-w`.
pub fn littlewood_paley(bank: &FilterBank) -> (f64, f64) {
    littlewood_paley_with(bank, true)
}

/// [`littlewood_paley`] with the averaging kernel optionally left out.
pub fn littlewood_paley_with(bank: &FilterBank, include_phi: bool) -> (f64, f64) {
    let (low, high) = littlewood_paley_terms(bank);
    if bank.grid().len() == 1 {
        let v = if include_phi { low[0] } else { 0.0 } + high[0];
        return (v, v);
    }
    let phi_weight = if include_phi { 1.0 } else { 0.0 };
    bounds_over_nonzero(low.iter().zip(&high).map(|(l, h)| phi_weight * l + h))
}

/// Fraction of a spectrum's energy on the Nyquist lines of the grid.
fn nyquist_fraction(spectrum: &Spectrum) -> f64 {
    let (rows, cols) = spectrum.shape().rows_cols();
    let total = spectrum.energy();
    if total == 0.0 {
        return 0.0;
    }
    let mut edge = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let on_edge = (cols > 1 && c == cols / 2) || (rows > 1 && r == rows / 2);
            if on_edge {
                edge += spectrum.values()[r * cols + c].norm_sqr();
            }
        }
    }
    edge / total
}

/// Builds the averaging kernel and all `J * K` wavelets, then rescales the
/// wavelets so the Littlewood–Paley sum peaks at exactly one.
pub fn build_bank(config: &BankConfig) -> Result<FilterBank> {
    config.validate()?;
    let phi = dft_forward(&gaussian_lowpass(config));
    let (rows, cols) = config.grid.rows_cols();
    let mut psis = Vec::with_capacity(config.j * config.k);
    let mut warnings = Vec::new();
    for j in 0..config.j {
        for k in 1..=config.k {
            let (dilation, theta) = wavelet_params(config, j, k);
            let psi = zero_mean_correct(&raw_morlet(config, dilation, theta)?);
            let spectrum = dft_forward(&psi);
            let mut bins = spectrum.into_values();
            bins[0] = Complex64::new(0.0, 0.0);
            if rows == 1 {
                // analytic: keep strictly positive frequencies below Nyquist
                for b in bins.iter_mut().skip(cols / 2) {
                    *b = Complex64::new(0.0, 0.0);
                }
            }
            let spectrum = Spectrum::new(config.grid, bins)?;
            let frac = nyquist_fraction(&spectrum);
            if frac > 1e-3 {
                warnings.push(format!(
                    "wavelet (j={j}, k={k}) keeps {frac:.2e} of its energy on the Nyquist ring"
                ));
            }
            psis.push(Wavelet { j, k, spectrum });
        }
    }
    let mut bank = FilterBank::from_spectra(config.clone(), phi, psis)?;
    bank.warnings = warnings;
    normalize(&mut bank)?;
    Ok(bank)
}

/// Picks the largest wavelet gain `g` with `|phi|^2 + g^2 * Psi <= 1` at
/// every frequency, applies it and refreshes the frame bounds. The averaging
/// kernel keeps unit mass.
fn normalize(bank: &mut FilterBank) -> Result<()> {
    if bank.psis.is_empty() {
        return Ok(());
    }
    let (low, high) = littlewood_paley_terms(bank);
    let mut gain_sq = f64::INFINITY;
    for (l, h) in low.iter().zip(&high).skip(1) {
        if *h > 0.0 {
            gain_sq = gain_sq.min((1.0 - l).max(0.0) / h);
        }
    }
    if !(gain_sq.is_finite() && gain_sq > 0.0) {
        return Err(ScatterError::Numerical(
            "wavelets vanish on the grid; cannot normalize the bank".into(),
        ));
    }
    let gain = gain_sq.sqrt();
    for w in bank.psis.iter_mut() {
        let scaled = w.spectrum.values().iter().map(|v| v * gain).collect();
        w.spectrum = Spectrum::new(w.spectrum.shape(), scaled)?;
    }
    bank.wavelet_gain = gain;
    bank.frame_bounds = littlewood_paley(bank);
    Ok(())
}
