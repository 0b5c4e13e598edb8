//! Discrete signals on regular periodic grids.
//!
//! Every convolution in the crate is circular: the grid is treated as one
//! period of a periodic signal. This makes translation covariance exact and
//! gives the convolution theorem without padding corrections.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::fft;

/// Grid layout of a [`Signal`]. 2D grids are stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    D1(usize),
    D2(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        let (r, c) = self.rows_cols();
        r * c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of index dimensions (1 or 2).
    pub fn dim(&self) -> usize {
        match self {
            Shape::D1(_) => 1,
            Shape::D2(..) => 2,
        }
    }

    /// `(rows, cols)`, with a 1D grid viewed as a single row.
    pub fn rows_cols(&self) -> (usize, usize) {
        match *self {
            Shape::D1(n) => (1, n),
            Shape::D2(h, w) => (h, w),
        }
    }

    /// Per-dimension extents, outermost first.
    pub fn extents(&self) -> Vec<usize> {
        match *self {
            Shape::D1(n) => vec![n],
            Shape::D2(h, w) => vec![h, w],
        }
    }

    fn scaled_down(&self, factor: usize) -> Shape {
        match *self {
            Shape::D1(n) => Shape::D1(n / factor),
            Shape::D2(h, w) => Shape::D2(h / factor, w / factor),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::D1(n) => write!(f, "{n}"),
            Shape::D2(h, w) => write!(f, "{h}x{w}"),
        }
    }
}

/// A complex-valued sampled signal `x(u)` on a 1D or 2D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    values: Vec<Complex64>,
    shape: Shape,
    step: f64,
}

impl Signal {
    /// Builds a signal, checking that the grid is non-empty, the values fit
    /// the shape and are all finite.
    pub fn new(shape: Shape, values: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(ScatterError::invalid("signal grid must be non-empty"));
        }
        if values.len() != shape.len() {
            return Err(ScatterError::invalid(format!(
                "{} values do not fill a {shape} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ScatterError::invalid("signal values must be finite"));
        }
        Ok(Signal {
            values,
            shape,
            step: 1.0,
        })
    }

    pub fn from_real(shape: Shape, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_real_1d(values: &[f64]) -> Result<Self> {
        Self::from_real(Shape::D1(values.len()), values)
    }

    pub fn from_complex_1d(values: Vec<Complex64>) -> Result<Self> {
        Self::new(Shape::D1(values.len()), values)
    }

    /// All-zero signal of the given shape.
    pub fn zeros(shape: Shape) -> Result<Self> {
        Self::new(shape, vec![Complex64::new(0.0, 0.0); shape.len()])
    }

    /// Unit impulse at the origin.
    pub fn impulse(shape: Shape) -> Result<Self> {
        let mut s = Self::zeros(shape)?;
        s.values[0] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Sets the grid spacing. Fails unless `step > 0`.
    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ScatterError::invalid(format!(
                "grid step must be positive, got {step}"
            )));
        }
        self.step = step;
        Ok(self)
    }

    // Internal constructor for values produced by our own arithmetic.
    pub(crate) fn from_parts(shape: Shape, values: Vec<Complex64>, step: f64) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Signal { values, shape, step }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let (_, cols) = self.shape.rows_cols();
        self.values[row * cols + col]
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> Complex64 {
        self.sum() / self.len() as f64
    }

    /// Squared L2 norm over samples (no step weighting).
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum()
    }

    pub fn scale(&self, factor: f64) -> Signal {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Signal {
        Signal::from_parts(self.shape, self.values.iter().map(|&v| f(v)).collect(), self.step)
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &Signal, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Signal> {
        ensure_same_shape(self.shape, other.shape)?;
        Ok(Signal::from_parts(
            self.shape,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            self.step,
        ))
    }

    /// Circular shift: `out(u) = x(u - offset)`. `offset` has one entry per
    /// grid dimension.
    pub fn circular_shift(&self, offset: &[isize]) -> Result<Signal> {
        if offset.len() != self.dim() {
            return Err(ScatterError::invalid(format!(
                "shift has {} components for a {}D signal",
                offset.len(),
                self.dim()
            )));
        }
        let (rows, cols) = self.shape.rows_cols();
        let (dr, dc) = match offset {
            [d] => (0, *d),
            [r, c] => (*r, *c),
            _ => unreachable!(),
        };
        let dr = dr.rem_euclid(rows as isize) as usize;
        let dc = dc.rem_euclid(cols as isize) as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for r in 0..rows {
            let nr = (r + dr) % rows;
            for c in 0..cols {
                out[nr * cols + (c + dc) % cols] = self.values[r * cols + c];
            }
        }
        Ok(Signal::from_parts(self.shape, out, self.step))
    }

    /// Embeds the signal into a larger zero grid with its origin at `offset`.
    pub fn zero_pad(&self, target: Shape, offset: &[usize]) -> Result<Signal> {
        if target.dim() != self.dim() || offset.len() != self.dim() {
            return Err(ScatterError::invalid("padding must keep dimensionality"));
        }
        let (rows, cols) = self.shape.rows_cols();
        let (trows, tcols) = target.rows_cols();
        let (or, oc) = match offset {
            [c] => (0, *c),
            [r, c] => (*r, *c),
            _ => unreachable!(),
        };
        if or + rows > trows || oc + cols > tcols {
            return Err(ScatterError::invalid(format!(
                "{} grid at offset {offset:?} does not fit in {target}",
                self.shape
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        for r in 0..rows {
            let dst = (r + or) * tcols + oc;
            out[dst..dst + cols].copy_from_slice(&self.values[r * cols..(r + 1) * cols]);
        }
        Ok(Signal::from_parts(target, out, self.step))
    }

    /// Zero-pads to the smallest power-of-two grid that is at least as large
    /// in every dimension, keeping the content centered.
    pub fn pad_to_power_of_two(&self) -> Signal {
        let extents = self.shape.extents();
        let target_ext: Vec<usize> = extents.iter().map(|&n| n.next_power_of_two()).collect();
        if target_ext == extents {
            return self.clone();
        }
        let offset: Vec<usize> = extents
            .iter()
            .zip(&target_ext)
            .map(|(&n, &t)| (t - n) / 2)
            .collect();
        let target = match target_ext.as_slice() {
            [n] => Shape::D1(*n),
            [h, w] => Shape::D2(*h, *w),
            _ => unreachable!(),
        };
        self.zero_pad(target, &offset).expect("target encloses source")
    }
}

/// Spectrum of a signal: unnormalized DFT coefficients, DC at index 0 and the
/// remaining bins in standard FFT order along every axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
    shape: Shape,
}

impl Spectrum {
    pub fn new(shape: Shape, values: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(ScatterError::invalid("spectrum must be non-empty"));
        }
        if values.len() != shape.len() {
            return Err(ScatterError::invalid(format!(
                "{} bins do not fill a {shape} grid",
                values.len()
            )));
        }
        Ok(Spectrum { values, shape })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

pub(crate) fn ensure_same_shape(a: Shape, b: Shape) -> Result<()> {
    if a != b {
        return Err(ScatterError::invalid(format!("shape mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Unnormalized forward DFT with kernel `exp(-2 pi i k t / n)`.
pub fn dft_forward(x: &Signal) -> Spectrum {
    let (rows, cols) = x.shape.rows_cols();
    Spectrum {
        values: fft::forward(&x.values, rows, cols),
        shape: x.shape,
    }
}

/// Inverse DFT with the `1/n` factor, so it undoes [`dft_forward`]. The
/// returned signal has unit step.
pub fn dft_inverse(spectrum: &Spectrum) -> Signal {
    let (rows, cols) = spectrum.shape.rows_cols();
    Signal::from_parts(spectrum.shape, fft::inverse(&spectrum.values, rows, cols), 1.0)
}

/// Circular convolution by the defining double sum. O(n^2); used as the
/// reference for [`convolve_fft`].
pub fn convolve_direct(x: &Signal, h: &Signal) -> Result<Signal> {
    ensure_same_shape(x.shape, h.shape)?;
    let (rows, cols) = x.shape.rows_cols();
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for tr in 0..rows {
        for tc in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for ur in 0..rows {
                let hr = (tr + rows - ur) % rows;
                for uc in 0..cols {
                    let hc = (tc + cols - uc) % cols;
                    acc += x.values[ur * cols + uc] * h.values[hr * cols + hc];
                }
            }
            out[tr * cols + tc] = acc;
        }
    }
    Ok(Signal::from_parts(x.shape, out, x.step))
}

/// Circular convolution through the convolution theorem.
pub fn convolve_fft(x: &Signal, h: &Signal) -> Result<Signal> {
    ensure_same_shape(x.shape, h.shape)?;
    let (rows, cols) = x.shape.rows_cols();
    let mut xf = fft::forward(&x.values, rows, cols);
    let hf = fft::forward(&h.values, rows, cols);
    for (a, b) in xf.iter_mut().zip(&hf) {
        *a *= b;
    }
    Ok(Signal::from_parts(x.shape, fft::inverse(&xf, rows, cols), x.step))
}

/// Convolution of a signal with a filter already held in the frequency
/// domain.
pub fn convolve_spectrum(x: &Signal, filter: &Spectrum) -> Result<Signal> {
    ensure_same_shape(x.shape, filter.shape)?;
    let (rows, cols) = x.shape.rows_cols();
    let mut xf = fft::forward(&x.values, rows, cols);
    for (a, b) in xf.iter_mut().zip(&filter.values) {
        *a *= b;
    }
    Ok(Signal::from_parts(x.shape, fft::inverse(&xf, rows, cols), x.step))
}

/// Pointwise complex modulus. The result is real (zero imaginary parts).
pub fn modulus(x: &Signal) -> Signal {
    x.map(|v| Complex64::new(v.norm(), 0.0))
}

/// Keeps every `factor`-th sample along each axis, multiplying the step.
pub fn subsample(x: &Signal, factor: usize) -> Result<Signal> {
    if factor == 0 {
        return Err(ScatterError::invalid("subsampling factor must be positive"));
    }
    if x.shape.extents().iter().any(|n| n % factor != 0) {
        return Err(ScatterError::invalid(format!(
            "factor {factor} does not divide a {} grid",
            x.shape
        )));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let (rows, cols) = x.shape.rows_cols();
    let out_shape = x.shape.scaled_down(factor);
    let row_stride = if rows == 1 { 1 } else { factor };
    let mut out = Vec::with_capacity(out_shape.len());
    for r in (0..rows).step_by(row_stride) {
        for c in (0..cols).step_by(factor) {
            out.push(x.values[r * cols + c]);
        }
    }
    Ok(Signal::from_parts(out_shape, out, x.step * factor as f64))
}
