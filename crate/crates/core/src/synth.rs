//! Seeded synthetic signals for tests and experiments.
//!
//! Every generator takes an explicit RNG so experiments can be replayed from
//! a single seed. Use [`rng`] to get the crate's standard generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::fft;
use crate::signal::{Shape, Signal};
use crate::timefreq::centered_coord;

/// The generator used throughout experiments.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// I.i.d. standard normal samples.
pub fn white_noise<R: Rng>(shape: Shape, rng: &mut R) -> Signal {
    let vals: Vec<f64> = (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect();
    Signal::from_real(shape, &vals).expect("finite samples")
}

/// Circular Gaussian blur with spatial standard deviation `sigma` samples.
pub fn blur(x: &Signal, sigma: f64) -> Signal {
    let shape = x.shape();
    let (rows, cols) = shape.rows_cols();
    let mut spec = fft::forward(x.values(), rows, cols);
    for r in 0..rows {
        let wr = 2.0 * PI * centered_coord(r, rows) / rows as f64;
        for c in 0..cols {
            let wc = 2.0 * PI * centered_coord(c, cols) / cols as f64;
            let w2 = if rows == 1 { wc * wc } else { wr * wr + wc * wc };
            spec[r * cols + c] *= (-0.5 * sigma * sigma * w2).exp();
        }
    }
    let vals = fft::inverse(&spec, rows, cols);
    let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
    Signal::from_real(shape, &re)
        .expect("finite samples")
        .with_step(x.step())
        .expect("positive step")
}

/// A smooth image: blurred noise scaled to unit standard deviation, plus an
/// offset of 1.
pub fn smooth_image<R: Rng>(n: usize, rng: &mut R) -> Signal {
    let b = blur(&white_noise(Shape::D2(n, n), rng), n as f64 / 10.0);
    let std = (b.energy() / b.len() as f64 - b.mean().norm_sqr())
        .sqrt()
        .max(1e-300);
    b.map(|v| Complex64::new(1.0 + (v.re - b.mean().re) / std, 0.0))
}

/// A periodic texture in roughly `[0, 1]`: a few oriented gratings at
/// integer frequencies plus a mild blurred-noise component.
pub fn texture<R: Rng>(n: usize, rng: &mut R) -> Signal {
    let nf = n as f64;
    let max_freq = (n / 3).max(2);
    let mut vals = vec![0.5; n * n];
    for _ in 0..4 {
        let (fr, fc) = loop {
            let fr = rng.random_range(-(max_freq as i64)..=max_freq as i64);
            let fc = rng.random_range(-(max_freq as i64)..=max_freq as i64);
            let r2 = fr * fr + fc * fc;
            if r2 >= 4 && r2 <= (max_freq * max_freq) as i64 {
                break (fr as f64, fc as f64);
            }
        };
        let amp = rng.random_range(0.05..0.15);
        let phase = rng.random_range(0.0..2.0 * PI);
        for r in 0..n {
            for c in 0..n {
                let arg = 2.0 * PI * (fr * r as f64 + fc * c as f64) / nf + phase;
                vals[r * n + c] += amp * arg.cos();
            }
        }
    }
    let noise = blur(&white_noise(Shape::D2(n, n), rng), 1.0);
    for (v, z) in vals.iter_mut().zip(noise.values()) {
        *v += 0.1 * z.re;
    }
    Signal::from_real(Shape::D2(n, n), &vals).expect("finite samples")
}

/// Uniform random image in `[0, 1)`.
pub fn uniform_image<R: Rng>(n: usize, rng: &mut R) -> Signal {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    Signal::from_real(Shape::D2(n, n), &vals).expect("finite samples")
}

/// Well-sampled 1D test signals for spread measurements: modulated
/// Gaussians, chirps, Gaussian pairs, windowed noise and smoothed boxes.
/// Widths stay between `n / 64` and `n / 12` so neither domain is
/// undersampled.
pub fn spread_family<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<Signal> {
    let nf = n as f64;
    let centered = |i: usize, c: f64| {
        let d = (i as f64 - c).rem_euclid(nf);
        if d > nf / 2.0 {
            d - nf
        } else {
            d
        }
    };
    (0..count)
        .map(|idx| {
            let sigma = rng.random_range(nf / 64.0..nf / 12.0);
            let center = rng.random_range(0.0..nf);
            let freq = rng.random_range(0.0..0.25);
            let vals: Vec<Complex64> = match idx % 5 {
                0 => (0..n)
                    .map(|i| {
                        let t = centered(i, center);
                        Complex64::from_polar((-t * t / (2.0 * sigma * sigma)).exp(), 2.0 * PI * freq * t)
                    })
                    .collect(),
                1 => {
                    let rate = rng.random_range(-1.0..1.0) / (sigma * sigma);
                    (0..n)
                        .map(|i| {
                            let t = centered(i, center);
                            Complex64::from_polar((-t * t / (2.0 * sigma * sigma)).exp(), PI * rate * t * t)
                        })
                        .collect()
                }
                2 => {
                    let gap = rng.random_range(2.0..5.0) * sigma;
                    (0..n)
                        .map(|i| {
                            let a = centered(i, center);
                            let b = centered(i, center + gap);
                            let g = |t: f64| (-t * t / (2.0 * sigma * sigma)).exp();
                            Complex64::new(g(a) + 0.7 * g(b), 0.0)
                        })
                        .collect()
                }
                3 => {
                    let noise = blur(&white_noise(Shape::D1(n), rng), sigma / 8.0);
                    (0..n)
                        .map(|i| {
                            let t = centered(i, center);
                            noise.values()[i] * (-t * t / (2.0 * sigma * sigma)).exp()
                        })
                        .collect()
                }
                _ => {
                    let half = 2.0 * sigma;
                    let b: Vec<f64> = (0..n)
                        .map(|i| {
                            if centered(i, center).abs() <= half {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let boxed = Signal::from_real(Shape::D1(n), &b).expect("finite samples");
                    blur(&boxed, sigma / 4.0).values().to_vec()
                }
            };
            Signal::new(Shape::D1(n), vals).expect("finite samples")
        })
        .collect()
}
