//! Time–frequency analysis of 1D signals: the windowed Fourier transform,
//! the continuous wavelet transform and second-moment spread measurements.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, ScatterError};
use crate::fft;
use crate::filterbank::zero_mean_correct;
use crate::signal::{convolve_fft, Shape, Signal};

/// Windowed Fourier coefficients, one row per frame.
#[derive(Clone, Debug)]
pub struct TimeFreqMap {
    values: Vec<Complex64>,
    frames: usize,
    bins: usize,
    pub hop: usize,
    pub window_len: usize,
}

impl TimeFreqMap {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.values[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.values[frame * self.bins..(frame + 1) * self.bins]
    }

    /// Index of the largest-magnitude bin in a frame (lowest index on ties).
    pub fn peak_bin(&self, frame: usize) -> usize {
        argmax(self.frame(frame).iter().map(|v| v.norm()))
    }
}

/// Wavelet coefficients, one row per scale.
#[derive(Clone, Debug)]
pub struct ScaleTimeMap {
    values: Vec<Complex64>,
    len: usize,
    pub scales: Vec<f64>,
    pub p: f64,
}

impl ScaleTimeMap {
    pub fn row(&self, scale_index: usize) -> &[Complex64] {
        &self.values[scale_index * self.len..(scale_index + 1) * self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpreadReport {
    /// Standard deviation of the normalized energy density in time.
    pub time_spread: f64,
    /// Standard deviation of the normalized spectral energy density, in
    /// cycles per unit of time.
    pub freq_spread: f64,
    pub product: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyReport {
    pub products: Vec<f64>,
    pub min_product: f64,
    /// Gaussian reference product the family is compared against.
    pub reference: f64,
    /// Indices of signals whose product falls below `reference * (1 - 1e-3)`.
    pub violators: Vec<usize>,
}

impl UncertaintyReport {
    pub fn holds(&self) -> bool {
        self.violators.is_empty()
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn require_1d(x: &Signal, what: &str) -> Result<usize> {
    match x.shape() {
        Shape::D1(n) => Ok(n),
        s => Err(ScatterError::invalid(format!(
            "{what} must be 1D, got a {s} grid"
        ))),
    }
}

/// Windowed Fourier transform with circularly shifted windows.
///
/// Frame `m` is the DFT of `x(u) * w(u - m*hop)`. A window shorter than the
/// signal is zero-extended; `hop` must divide the signal length.
pub fn windowed_fourier(x: &Signal, window: &Signal, hop: usize) -> Result<TimeFreqMap> {
    let n = require_1d(x, "signal")?;
    let wl = require_1d(window, "window")?;
    if wl > n {
        return Err(ScatterError::invalid(format!(
            "window of {wl} samples is longer than the {n}-sample signal"
        )));
    }
    if hop == 0 || n % hop != 0 {
        return Err(ScatterError::invalid(format!(
            "hop {hop} does not divide signal length {n}"
        )));
    }
    let frames = n / hop;
    let xs = x.values();
    let ws = window.values();
    let mut values = Vec::with_capacity(frames * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..frames {
        let start = m * hop;
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, w) in ws.iter().enumerate() {
            let u = (start + k) % n;
            buf[u] = xs[u] * w;
        }
        fft::fft2_in_place(&mut buf, 1, n, false);
        values.extend_from_slice(&buf);
    }
    Ok(TimeFreqMap {
        values,
        frames,
        bins: n,
        hop,
        window_len: wl,
    })
}

/// Hann window of the given length (periodic form).
pub fn hann_window(len: usize) -> Result<Signal> {
    let vals: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect();
    Signal::from_real_1d(&vals)
}

/// Centered circular coordinate of grid index `i` on an `n`-point axis:
/// `0, 1, ..., n/2 - 1, -n/2, ..., -1`.
pub(crate) fn centered_coord(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Dilates a mother wavelet to scale `s` with amplitude `|s|^-p`.
///
/// The mother is read as a filter: index `i` holds `psi(u)` at the centered
/// coordinate of `i`. Off-grid samples `psi(u/s)` come from linear
/// interpolation, with zero outside the mother's grid. Interpolation breaks
/// exact zero mean, so the result is passed through [`zero_mean_correct`].
pub fn dilate_wavelet(mother: &Signal, s: f64, p: f64) -> Result<Signal> {
    let n = require_1d(mother, "mother wavelet")?;
    if s == 0.0 || !s.is_finite() {
        return Err(ScatterError::invalid("wavelet scale must be nonzero"));
    }
    let amp = s.abs().powf(-p);
    let mv = mother.values();
    let half = n.div_ceil(2) as isize;
    let lo = half - n as isize;
    let sample = |k: isize| -> Complex64 {
        if k < lo || k >= half {
            Complex64::new(0.0, 0.0)
        } else {
            mv[k.rem_euclid(n as isize) as usize]
        }
    };
    let vals: Vec<Complex64> = (0..n)
        .map(|i| {
            let q = centered_coord(i, n) / s;
            let k0 = q.floor();
            let f = q - k0;
            let k0 = k0 as isize;
            (sample(k0) * (1.0 - f) + sample(k0 + 1) * f) * amp
        })
        .collect();
    Ok(zero_mean_correct(&Signal::from_complex_1d(vals)?))
}

/// Continuous wavelet transform `(x * psi_s)(t)` for each scale.
pub fn cwt(x: &Signal, mother: &Signal, scales: &[f64], p: f64) -> Result<ScaleTimeMap> {
    let n = require_1d(x, "signal")?;
    let mn = require_1d(mother, "mother wavelet")?;
    if mn != n {
        return Err(ScatterError::invalid(format!(
            "mother wavelet has {mn} samples, signal has {n}"
        )));
    }
    if mother.mean().norm() > 1e-8 {
        return Err(ScatterError::invalid(format!(
            "mother wavelet mean {} is not zero",
            mother.mean().norm()
        )));
    }
    if p.is_nan() || p < 0.0 {
        return Err(ScatterError::invalid("scaling exponent p must be >= 0"));
    }
    if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(ScatterError::invalid("scales must be finite and nonzero"));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScatterError::invalid("scales must be strictly increasing"));
    }
    let mut values = Vec::with_capacity(scales.len() * n);
    for &s in scales {
        let psi = dilate_wavelet(mother, s, p)?;
        values.extend(convolve_fft(x, &psi)?.into_values());
    }
    Ok(ScaleTimeMap {
        values,
        len: n,
        scales: scales.to_vec(),
        p,
    })
}

/// Standard deviation of a circular density, measured after rolling its
/// circular centroid to the middle of the axis.
fn circular_spread(density: &[f64]) -> f64 {
    let n = density.len();
    let total: f64 = density.iter().sum();
    let phasor: Complex64 = density
        .iter()
        .enumerate()
        .map(|(t, &p)| Complex64::from_polar(p, 2.0 * PI * t as f64 / n as f64))
        .sum();
    let centroid = phasor.arg().rem_euclid(2.0 * PI) * n as f64 / (2.0 * PI);
    let roll = ((n / 2) as f64 - centroid).round() as isize;
    let pos = |t: usize| (t as isize + roll).rem_euclid(n as isize) as f64;
    let mean: f64 = density.iter().enumerate().map(|(t, &p)| pos(t) * p).sum::<f64>() / total;
    let var: f64 = density
        .iter()
        .enumerate()
        .map(|(t, &p)| (pos(t) - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Time spread, frequency spread and their product for a 1D signal.
pub fn measure_spread(x: &Signal) -> Result<SpreadReport> {
    let n = require_1d(x, "signal")?;
    if x.energy() == 0.0 {
        return Err(ScatterError::invalid("spread of the zero signal is undefined"));
    }
    let time_density: Vec<f64> = x.values().iter().map(|v| v.norm_sqr()).collect();
    let spectrum = fft::forward(x.values(), 1, n);
    let freq_density: Vec<f64> = spectrum.iter().map(|v| v.norm_sqr()).collect();
    let time_spread = circular_spread(&time_density) * x.step();
    let freq_spread = circular_spread(&freq_density) / (n as f64 * x.step());
    Ok(SpreadReport {
        time_spread,
        freq_spread,
        product: time_spread * freq_spread,
    })
}

/// Sampled Gaussian `exp(-t^2 / (2 sigma^2))` centered at index 0.
pub fn gaussian_signal(n: usize, sigma: f64) -> Result<Signal> {
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let t = centered_coord(i, n);
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    Signal::from_real_1d(&vals)
}

/// Spread product of a finely sampled Gaussian. The Gaussian minimizes the
/// product, so this is the lower bound used by [`uncertainty_check`].
pub fn gaussian_reference_product() -> f64 {
    let g = gaussian_signal(4096, 64.0).expect("valid grid");
    measure_spread(&g).expect("nonzero").product
}

/// Relative slack allowed below the Gaussian reference.
pub const UNCERTAINTY_SLACK: f64 = 1e-3;

/// Measures the spread product of every signal and flags any that dip below
/// the Gaussian reference.
pub fn uncertainty_check(signals: &[Signal]) -> Result<UncertaintyReport> {
    if signals.is_empty() {
        return Err(ScatterError::invalid("signal family is empty"));
    }
    let products = signals
        .iter()
        .map(|s| measure_spread(s).map(|r| r.product))
        .collect::<Result<Vec<_>>>()?;
    let reference = gaussian_reference_product();
    let floor = reference * (1.0 - UNCERTAINTY_SLACK);
    let violators = products
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < floor)
        .map(|(i, _)| i)
        .collect();
    let min_product = products.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(UncertaintyReport {
        products,
        min_product,
        reference,
        violators,
    })
}
