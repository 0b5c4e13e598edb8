//! Wavelet scattering transforms on 1D and 2D grids.
//!
//! The crate covers the whole chain from discrete Fourier analysis to
//! scattering features:
//!
//! * [`signal`]: signals, DFTs and circular convolution,
//! * [`timefreq`]: windowed Fourier and continuous wavelet transforms plus
//!   time/frequency spread measurements,
//! * [`filterbank`]: Morlet filter banks with Littlewood–Paley diagnostics,
//! * [`scattering`]: the first-order invariant map and the scattering tree,
//! * [`stability`]: translations, warps, the deformation norm and
//!   Lipschitz-ratio experiments,
//! * [`dataset`], [`linear`], [`pipeline`]: IDX ingestion, ridge one-vs-rest
//!   classification and batch feature extraction.

pub mod container;
pub mod dataset;
pub mod error;
mod fft;
pub mod filterbank;
mod io_util;
pub mod linear;
pub mod pipeline;
pub mod scattering;
pub mod signal;
pub mod stability;
pub mod synth;
pub mod timefreq;

pub use error::{Result, ScatterError};
pub use rustfft::num_complex::Complex64;
pub use signal::{
    convolve_direct, convolve_fft, convolve_spectrum, dft_forward, dft_inverse, modulus, subsample, Shape,
    Signal, Spectrum,
};
