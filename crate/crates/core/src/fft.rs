//! Thin FFT layer over `rustfft` for row-major 1D and 2D grids.
//!
//! Plans are cached per thread, so repeated transforms of the same size
//! (the common case inside a scattering tree) do not re-plan.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform_rows(data: &mut [Complex64], row_len: usize, direction: FftDirection) {
    if row_len <= 1 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(row_len, direction));
    fft.process(data);
}

/// In-place unnormalized transform of a `rows x cols` row-major grid.
/// A 1D signal is passed as `rows == 1`.
pub(crate) fn fft2_in_place(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    debug_assert_eq!(data.len(), rows * cols);
    let direction = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    transform_rows(data, cols, direction);
    if rows > 1 {
        let mut transposed = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut transposed, rows, cols);
        transform_rows(&mut transposed, rows, direction);
        transpose(&transposed, data, cols, rows);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Forward transform, returning a new buffer.
pub(crate) fn forward(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = data.to_vec();
    fft2_in_place(&mut out, rows, cols, false);
    out
}

/// Inverse transform including the `1/n` normalization.
pub(crate) fn inverse(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = data.to_vec();
    fft2_in_place(&mut out, rows, cols, true);
    let scale = 1.0 / (rows * cols) as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}
