//! Translations, warps and empirical deformation-stability measurements.
//!
//! A deformation is a displacement field `g` on the signal grid, acting by
//! `g.x(u) = x(u - g(u))`. Its size is measured with
//!
//! ```text
//! |g| = 2^-J sup_u |g(u)| + sup_u ||grad g(u)||
//! ```
//!
//! where the gradient norm is the operator 2-norm of the Jacobian.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::filterbank::{build_bank, BankConfig, FilterBank};
use crate::scattering::{first_order_map, scatter, ScatterConfig};
use crate::signal::{dft_forward, Shape, Signal};
use crate::synth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeformationKind {
    Translation,
    Dilation,
    RandomSmooth,
    Custom,
}

/// A displacement field in samples. Entry `i` holds `(row, col)`
/// displacements for 2D grids; on 1D grids only the first component is used.
#[derive(Clone, Debug, PartialEq)]
pub struct Deformation {
    shape: Shape,
    field: Vec<[f64; 2]>,
    kind: DeformationKind,
}

/// Derivative of one field component along one axis. Centered differences
/// in the interior, one-sided at the grid edges: fields such as dilations are
/// not periodic, and wrapping would report the jump across the seam.
fn axis_derivative(
    field: &[[f64; 2]],
    comp: usize,
    rows: usize,
    cols: usize,
    r: usize,
    c: usize,
    along_rows: bool,
) -> f64 {
    let (i, n) = if along_rows { (r, rows) } else { (c, cols) };
    if n < 2 {
        return 0.0;
    }
    let at = |k: usize| {
        if along_rows {
            field[k * cols + c][comp]
        } else {
            field[r * cols + k][comp]
        }
    };
    if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        0.5 * (at(i + 1) - at(i - 1))
    }
}

/// Largest singular value of `[[a, b], [c, d]]`.
fn op_norm_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

impl Deformation {
    /// Validates the field: matching length, finite values and
    /// `sup ||grad g|| < 1` so the warp stays invertible.
    pub fn new(shape: Shape, field: Vec<[f64; 2]>, kind: DeformationKind) -> Result<Self> {
        if field.len() != shape.len() {
            return Err(ScatterError::invalid(format!(
                "deformation field has {} entries for a {} grid",
                field.len(),
                shape
            )));
        }
        if field.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ScatterError::invalid(
                "deformation field has non-finite displacements",
            ));
        }
        let g = Deformation { shape, field, kind };
        let grad = g.sup_gradient();
        if grad >= 1.0 {
            return Err(ScatterError::invalid(format!(
                "deformation is not a small diffeomorphism: sup |grad g| = {grad} >= 1"
            )));
        }
        Ok(g)
    }

    pub fn zero(shape: Shape) -> Self {
        Deformation {
            shape,
            field: vec![[0.0; 2]; shape.len()],
            kind: DeformationKind::Translation,
        }
    }

    /// Constant field `v` (one component per axis).
    pub fn translation(shape: Shape, v: &[f64]) -> Result<Self> {
        if v.len() != shape.dim() {
            return Err(ScatterError::invalid(format!(
                "translation has {} components for a {}-D grid",
                v.len(),
                shape.dim()
            )));
        }
        let d = if v.len() == 1 { [v[0], 0.0] } else { [v[0], v[1]] };
        Deformation::new(shape, vec![d; shape.len()], DeformationKind::Translation)
    }

    /// `g(u) = eps * (u - center)` with the center at index `n / 2` per axis.
    pub fn dilation(shape: Shape, eps: f64) -> Result<Self> {
        let (rows, cols) = shape.rows_cols();
        let (cr, cc) = ((rows / 2) as f64, (cols / 2) as f64);
        let field = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| match shape {
                    Shape::D1(_) => [eps * (c as f64 - cc), 0.0],
                    Shape::D2(..) => [eps * (r as f64 - cr), eps * (c as f64 - cc)],
                })
            })
            .collect();
        Deformation::new(shape, field, DeformationKind::Dilation)
    }

    /// Low-pass Gaussian vector field (spatial correlation length
    /// `smoothness` samples) rescaled so that `sup ||grad g|| = max_gradient`.
    pub fn random_smooth<R: Rng>(
        shape: Shape,
        max_gradient: f64,
        smoothness: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&max_gradient) {
            return Err(ScatterError::invalid(format!(
                "target gradient {max_gradient} outside [0, 1)"
            )));
        }
        let comps: Vec<Signal> = (0..shape.dim())
            .map(|_| synth::blur(&synth::white_noise(shape, rng), smoothness))
            .collect();
        let field: Vec<[f64; 2]> = (0..shape.len())
            .map(|i| {
                let mut d = [0.0; 2];
                for (a, s) in comps.iter().enumerate() {
                    d[a] = s.values()[i].re;
                }
                d
            })
            .collect();
        let raw = Deformation {
            shape,
            field,
            kind: DeformationKind::RandomSmooth,
        };
        let grad = raw.sup_gradient();
        if grad == 0.0 {
            return Ok(raw);
        }
        raw.scaled(max_gradient / grad)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> DeformationKind {
        self.kind
    }

    pub fn field(&self) -> &[[f64; 2]] {
        &self.field
    }

    /// The field multiplied by `t >= 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(ScatterError::invalid("deformation scale must be nonnegative"));
        }
        let field = self.field.iter().map(|d| [d[0] * t, d[1] * t]).collect();
        Deformation::new(self.shape, field, self.kind)
    }

    /// `sup_u |g(u)|` (Euclidean length of the displacement).
    pub fn sup_displacement(&self) -> f64 {
        self.field.iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max)
    }

    /// `sup_u ||grad g(u)||`, operator 2-norm of the finite-difference
    /// Jacobian (absolute derivative in 1D).
    pub fn sup_gradient(&self) -> f64 {
        let (rows, cols) = self.shape.rows_cols();
        let f = &self.field;
        let mut sup: f64 = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let n = match self.shape {
                    Shape::D1(_) => axis_derivative(f, 0, rows, cols, r, c, false).abs(),
                    Shape::D2(..) => op_norm_2x2(
                        axis_derivative(f, 0, rows, cols, r, c, true),
                        axis_derivative(f, 0, rows, cols, r, c, false),
                        axis_derivative(f, 1, rows, cols, r, c, true),
                        axis_derivative(f, 1, rows, cols, r, c, false),
                    ),
                };
                sup = sup.max(n);
            }
        }
        sup
    }
}

/// `|g| = 2^-J sup|g| + sup ||grad g||`.
pub fn diffeo_norm(g: &Deformation, j: usize) -> f64 {
    g.sup_displacement() / (1u64 << j) as f64 + g.sup_gradient()
}

/// Circular shift `out(u) = x(u - v)`.
pub fn translate(x: &Signal, v: &[isize]) -> Result<Signal> {
    x.circular_shift(v)
}

/// `out(u) = x~(u - g(u))` with `x~` the circular (bi)linear interpolant.
pub fn warp(x: &Signal, g: &Deformation) -> Result<Signal> {
    if x.shape() != g.shape {
        return Err(ScatterError::invalid(format!(
            "deformation grid {} does not match signal grid {}",
            g.shape,
            x.shape()
        )));
    }
    let (rows, cols) = x.shape().rows_cols();
    let v = x.values();
    let split = |p: f64, n: usize| {
        let f = p.floor();
        let i0 = (f as i64).rem_euclid(n as i64) as usize;
        (i0, (i0 + 1) % n, p - f)
    };
    let out: Vec<Complex64> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let d = g.field[r * cols + c];
            match x.shape() {
                Shape::D1(_) => {
                    let (c0, c1, fc) = split(c as f64 - d[0], cols);
                    v[c0] * (1.0 - fc) + v[c1] * fc
                }
                Shape::D2(..) => {
                    let (r0, r1, fr) = split(r as f64 - d[0], rows);
                    let (c0, c1, fc) = split(c as f64 - d[1], cols);
                    v[r0 * cols + c0] * ((1.0 - fr) * (1.0 - fc))
                        + v[r0 * cols + c1] * ((1.0 - fr) * fc)
                        + v[r1 * cols + c0] * (fr * (1.0 - fc))
                        + v[r1 * cols + c1] * (fr * fc)
                }
            }
        })
        .collect();
    Signal::new(x.shape(), out)?.with_step(x.step())
}

/// Feature maps compared by the stability experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    /// The signal itself.
    Raw,
    /// `|x^| / sqrt(n)`, which has the same L2 norm as `x`.
    FourierModulus,
    ScatterM1,
    ScatterM2,
}

impl FeatureMap {
    pub const ALL: [FeatureMap; 4] = [
        FeatureMap::Raw,
        FeatureMap::FourierModulus,
        FeatureMap::ScatterM1,
        FeatureMap::ScatterM2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMap::Raw => "raw",
            FeatureMap::FourierModulus => "fourier-modulus",
            FeatureMap::ScatterM1 => "scatter-m1",
            FeatureMap::ScatterM2 => "scatter-m2",
        }
    }

    /// Scattering order, for the per-order ratio.
    pub fn scatter_order(self) -> Option<usize> {
        match self {
            FeatureMap::ScatterM1 => Some(1),
            FeatureMap::ScatterM2 => Some(2),
            _ => None,
        }
    }

    /// Feature vector whose L2 norm approximates the continuous norm:
    /// subsampled scattering entries are rescaled by the decimation factor.
    pub fn apply(self, x: &Signal, bank: &FilterBank) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Raw => Ok(x.values().iter().flat_map(|v| [v.re, v.im]).collect()),
            FeatureMap::FourierModulus => {
                let s = 1.0 / (x.len() as f64).sqrt();
                Ok(dft_forward(x).values().iter().map(|v| v.norm() * s).collect())
            }
            FeatureMap::ScatterM1 | FeatureMap::ScatterM2 => {
                let coeffs = if self == FeatureMap::ScatterM1 {
                    first_order_map(x, bank)?
                } else {
                    scatter(x, &ScatterConfig::new(bank.config().clone()), bank)?
                };
                let scale = coeffs.norm_scale();
                Ok(coeffs.feature_vector().into_iter().map(|v| v * scale).collect())
            }
        }
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMap {
    type Err = ScatterError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMap::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                ScatterError::invalid(format!(
                    "unknown feature map {s:?} (expected raw, fourier-modulus, scatter-m1 or scatter-m2)"
                ))
            })
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRatio {
    pub diffeo_norm: f64,
    /// `||Phi(g.x) - Phi(x)||`.
    pub delta: f64,
    pub signal_norm: f64,
    /// `delta / (|g| ||x||)`, zero when `delta` is zero.
    pub ratio: f64,
    /// `ratio / m` for scattering maps of order `m`.
    pub ratio_per_order: Option<f64>,
}

fn ratio_from(map: FeatureMap, delta: f64, norm_g: f64, norm_x: f64) -> LipschitzRatio {
    let ratio = if delta == 0.0 {
        0.0
    } else {
        delta / (norm_g * norm_x)
    };
    LipschitzRatio {
        diffeo_norm: norm_g,
        delta,
        signal_norm: norm_x,
        ratio,
        ratio_per_order: map.scatter_order().map(|m| ratio / m as f64),
    }
}

/// Lipschitz ratio of a feature map under one deformation. `J` is taken
/// from the bank.
pub fn lipschitz_ratio(
    map: FeatureMap,
    x: &Signal,
    g: &Deformation,
    bank: &FilterBank,
) -> Result<LipschitzRatio> {
    let base = map.apply(x, bank)?;
    let moved = map.apply(&warp(x, g)?, bank)?;
    Ok(ratio_from(
        map,
        l2_distance(&base, &moved),
        diffeo_norm(g, bank.config().j),
        x.norm_l2(),
    ))
}

pub const DEFAULT_INVARIANCE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub diffeo_norm: f64,
    pub relative_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceProfile {
    pub rows: Vec<ProfileRow>,
    pub threshold: f64,
    /// Largest `|g|` reached before the relative change first meets the
    /// threshold; 0 if even the smallest deformation does.
    pub radius: f64,
}

/// Relative feature change `||Phi(g.x) - Phi(x)|| / ||Phi(x)||` over a
/// family of deformations, sorted by `|g|`.
pub fn invariance_profile(
    map: FeatureMap,
    x: &Signal,
    family: &[Deformation],
    bank: &FilterBank,
    threshold: f64,
) -> Result<InvarianceProfile> {
    if family.is_empty() {
        return Err(ScatterError::invalid(
            "invariance profile needs at least one deformation",
        ));
    }
    let base = map.apply(x, bank)?;
    let base_norm = l2_norm(&base);
    let j = bank.config().j;
    let mut rows = family
        .iter()
        .map(|g| {
            let moved = map.apply(&warp(x, g)?, bank)?;
            let d = l2_distance(&base, &moved);
            Ok(ProfileRow {
                diffeo_norm: diffeo_norm(g, j),
                relative_change: if d == 0.0 { 0.0 } else { d / base_norm },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.diffeo_norm.total_cmp(&b.diffeo_norm));
    let radius = rows
        .iter()
        .take_while(|r| r.relative_change < threshold)
        .last()
        .map_or(0.0, |r| r.diffeo_norm);
    Ok(InvarianceProfile {
        rows,
        threshold,
        radius,
    })
}

/// Test signals used by an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    #[default]
    Texture,
    Smooth,
    Noise,
}

impl FromStr for SignalKind {
    type Err = ScatterError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "texture" => Ok(SignalKind::Texture),
            "smooth" => Ok(SignalKind::Smooth),
            "noise" => Ok(SignalKind::Noise),
            other => Err(ScatterError::invalid(format!("unknown signal kind {other:?}"))),
        }
    }
}

/// A deformation family in an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    Zero,
    Translation {
        shifts: Vec<[i64; 2]>,
    },
    Dilation {
        epsilons: Vec<f64>,
    },
    RandomSmooth {
        count: usize,
        max_gradient: f64,
        smoothness: f64,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::Translation { .. } => "translation",
            Family::Dilation { .. } => "dilation",
            Family::RandomSmooth { .. } => "random-smooth",
        }
    }

    fn generate<R: Rng>(&self, shape: Shape, rng: &mut R) -> Result<Vec<Deformation>> {
        match self {
            Family::Zero => Ok(vec![Deformation::zero(shape)]),
            Family::Translation { shifts } => shifts
                .iter()
                .map(|s| Deformation::translation(shape, &[s[0] as f64, s[1] as f64]))
                .collect(),
            Family::Dilation { epsilons } => epsilons
                .iter()
                .map(|&e| Deformation::dilation(shape, e))
                .collect(),
            Family::RandomSmooth {
                count,
                max_gradient,
                smoothness,
            } => (0..*count)
                .map(|_| Deformation::random_smooth(shape, *max_gradient, *smoothness, rng))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub seed: u64,
    /// Side of the square test images.
    pub grid: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub signals: usize,
    pub signal_kind: SignalKind,
    pub families: Vec<Family>,
    pub feature_maps: Vec<FeatureMap>,
}

impl Default for StabilityConfig {
    /// Ten 32x32 textures at `J = 3` under twenty random smooth deformations
    /// (`sup |grad g| = 0.02`) and a dilation sweep.
    fn default() -> Self {
        StabilityConfig {
            seed: 0,
            grid: 32,
            j: 3,
            signals: 10,
            signal_kind: SignalKind::Texture,
            families: vec![
                Family::RandomSmooth {
                    count: 20,
                    max_gradient: 0.02,
                    smoothness: 4.0,
                },
                Family::Dilation {
                    epsilons: vec![0.005, 0.01, 0.015, 0.02],
                },
            ],
            feature_maps: FeatureMap::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub signal: usize,
    pub family: String,
    pub deformation: usize,
    pub feature_map: FeatureMap,
    #[serde(flatten)]
    pub measure: LipschitzRatio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub family: String,
    pub feature_map: FeatureMap,
    pub count: usize,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub median_ratio_per_order: Option<f64>,
    pub max_ratio_per_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: StabilityConfig,
    pub rows: Vec<StabilityRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Median of a nonempty slice (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn make_signals<R: Rng>(kind: SignalKind, n: usize, count: usize, rng: &mut R) -> Vec<Signal> {
    (0..count)
        .map(|_| match kind {
            SignalKind::Texture => synth::texture(n, rng),
            SignalKind::Smooth => synth::smooth_image(n, rng),
            SignalKind::Noise => synth::white_noise(Shape::D2(n, n), rng),
        })
        .collect()
}

/// Runs every feature map on every (signal, deformation) pair. Signals and
/// deformations are drawn from one seeded stream before any parallel work,
/// and rows come back in (signal, family, deformation, map) order.
pub fn stability_experiment(config: &StabilityConfig) -> Result<StabilityReport> {
    if config.signals == 0 || config.families.is_empty() || config.feature_maps.is_empty() {
        return Err(ScatterError::InvalidConfig(
            "stability experiment needs signals, families and feature maps".into(),
        ));
    }
    let shape = Shape::D2(config.grid, config.grid);
    let bank = build_bank(&BankConfig::new_2d(config.j, config.grid, config.grid))?;
    let mut rng = synth::rng(config.seed);
    let signals = make_signals(config.signal_kind, config.grid, config.signals, &mut rng);
    let families = config
        .families
        .iter()
        .map(|f| Ok((f.name(), f.generate(shape, &mut rng)?)))
        .collect::<Result<Vec<_>>>()?;

    let maps = &config.feature_maps;
    let bases = signals
        .par_iter()
        .map(|x| maps.iter().map(|m| m.apply(x, &bank)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for s in 0..signals.len() {
        for (name, defs) in &families {
            for (d, g) in defs.iter().enumerate() {
                jobs.push((s, *name, d, g));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(s, name, d, g)| {
            let x = &signals[s];
            let moved = warp(x, g)?;
            let norm_g = diffeo_norm(g, config.j);
            maps.iter()
                .zip(&bases[s])
                .map(|(&m, base)| {
                    let delta = l2_distance(base, &m.apply(&moved, &bank)?);
                    Ok(StabilityRow {
                        signal: s,
                        family: name.to_string(),
                        deformation: d,
                        feature_map: m,
                        measure: ratio_from(m, delta, norm_g, x.norm_l2()),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    let mut aggregates = Vec::new();
    for (name, _) in &families {
        for &m in maps {
            let sel: Vec<&StabilityRow> = rows
                .iter()
                .filter(|r| r.family == *name && r.feature_map == m)
                .collect();
            let ratios: Vec<f64> = sel.iter().map(|r| r.measure.ratio).collect();
            let per: Vec<f64> = sel.iter().filter_map(|r| r.measure.ratio_per_order).collect();
            aggregates.push(Aggregate {
                family: name.to_string(),
                feature_map: m,
                count: sel.len(),
                median_ratio: median(&ratios),
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
                median_ratio_per_order: (!per.is_empty()).then(|| median(&per)),
                max_ratio_per_order: (!per.is_empty()).then(|| per.iter().copied().fold(0.0, f64::max)),
            });
        }
    }
    Ok(StabilityReport {
        config: config.clone(),
        rows,
        aggregates,
    })
}

impl StabilityReport {
    pub fn aggregate(&self, family: &str, map: FeatureMap) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.family == family && a.feature_map == map)
    }

    /// One line per (signal, deformation, feature map).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "signal,family,deformation,feature_map,diffeo_norm,delta,signal_norm,ratio,ratio_per_order\n",
        );
        for r in &self.rows {
            let m = &r.measure;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.signal,
                r.family,
                r.deformation,
                r.feature_map,
                m.diffeo_norm,
                m.delta,
                m.signal_norm,
                m.ratio,
                m.ratio_per_order.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
        out
    }

    /// Config echo and aggregate statistics (rows go to the CSV).
    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "config": self.config,
            "aggregates": self.aggregates,
        });
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::io_util::write_file(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        crate::io_util::write_file(&dir.join(format!("{stem}.json")), self.summary_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{rng, smooth_image, texture, white_noise};

    fn bank(j: usize, n: usize) -> FilterBank {
        build_bank(&BankConfig::new_2d(j, n, n)).unwrap()
    }

    #[test]
    fn translate_examples() {
        let x = Signal::from_real_1d(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(translate(&x, &[0]).unwrap(), x);
        assert_eq!(
            translate(&x, &[1]).unwrap().real_parts(),
            vec![4.0, 1.0, 2.0, 3.0]
        );
        let y = white_noise(Shape::D2(8, 8), &mut rng(1));
        // a permutation: the multiset of squared magnitudes is unchanged
        let sorted = |s: &Signal| {
            let mut v: Vec<f64> = s.values().iter().map(|z| z.norm_sqr()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(sorted(&translate(&y, &[3, -5]).unwrap()), sorted(&y));
    }

    #[test]
    fn zero_and_integer_warps_are_exact() {
        let x = texture(16, &mut rng(2));
        assert_eq!(warp(&x, &Deformation::zero(x.shape())).unwrap(), x);
        let g = Deformation::translation(x.shape(), &[2.0, -3.0]).unwrap();
        assert_eq!(warp(&x, &g).unwrap(), translate(&x, &[2, -3]).unwrap());
        let x1 = Signal::from_real_1d(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let g1 = Deformation::translation(x1.shape(), &[1.0]).unwrap();
        assert_eq!(warp(&x1, &g1).unwrap().real_parts(), vec![4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn half_sample_shift_interpolates() {
        let x = Signal::from_real_1d(&[0.0, 2.0, 4.0, 6.0]).unwrap();
        let g = Deformation::translation(x.shape(), &[0.5]).unwrap();
        assert_eq!(warp(&x, &g).unwrap().real_parts(), vec![3.0, 1.0, 3.0, 5.0]);
    }

    #[test]
    fn small_dilation_band() {
        let x = smooth_image(32, &mut rng(3));
        let g = Deformation::dilation(x.shape(), 0.01).unwrap();
        let rel = warp(&x, &g).unwrap().sub(&x).unwrap().norm_l2() / x.norm_l2();
        assert!(rel > 0.0 && rel <= 0.2, "{rel}");
    }

    #[test]
    fn large_gradients_are_rejected() {
        assert!(matches!(
            Deformation::dilation(Shape::D2(8, 8), 1.5),
            Err(ScatterError::InvalidInput(_))
        ));
        let field = vec![[f64::NAN, 0.0]; 4];
        assert!(Deformation::new(Shape::D1(4), field, DeformationKind::Custom).is_err());
        assert!(Deformation::new(Shape::D1(4), vec![[0.0; 2]; 3], DeformationKind::Custom).is_err());
    }

    #[test]
    fn diffeo_norm_examples() {
        let s = Shape::D2(32, 32);
        assert_eq!(diffeo_norm(&Deformation::zero(s), 3), 0.0);
        let t = Deformation::translation(s, &[3.0, 4.0]).unwrap();
        assert!((diffeo_norm(&t, 3) - 5.0 / 8.0).abs() < 1e-15);
        let eps = 0.01;
        let d = Deformation::dilation(s, eps).unwrap();
        let expected = eps * 16.0 * 2f64.sqrt() / 8.0 + eps;
        let got = diffeo_norm(&d, 3);
        assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn diffeo_norm_is_homogeneous() {
        let g = Deformation::random_smooth(Shape::D2(16, 16), 0.05, 3.0, &mut rng(4)).unwrap();
        assert!((g.sup_gradient() - 0.05).abs() < 1e-12);
        for t in [0.0, 0.5, 2.0, 7.5] {
            let gt = g.scaled(t).unwrap();
            assert!((diffeo_norm(&gt, 2) - t * diffeo_norm(&g, 2)).abs() <= 1e-12 * (1.0 + t));
        }
    }

    #[test]
    fn warp_nearly_preserves_norm() {
        for seed in 0..5 {
            let x = smooth_image(32, &mut rng(seed));
            let g = Deformation::random_smooth(x.shape(), 0.02, 4.0, &mut rng(100 + seed)).unwrap();
            let w = warp(&x, &g).unwrap();
            assert!((w.norm_l2() / x.norm_l2() - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn zero_deformation_gives_zero_ratios() {
        let b = bank(3, 32);
        let x = texture(32, &mut rng(5));
        let g = Deformation::zero(x.shape());
        for m in FeatureMap::ALL {
            let r = lipschitz_ratio(m, &x, &g, &b).unwrap();
            assert_eq!(r.ratio, 0.0);
        }
        assert!("fourier".parse::<FeatureMap>().is_err());
        assert_eq!("scatter-m2".parse::<FeatureMap>().unwrap(), FeatureMap::ScatterM2);
    }

    #[test]
    fn raw_is_less_stable_than_scattering_on_noise() {
        let b = bank(5, 32);
        for seed in 0..4 {
            let x = white_noise(Shape::D2(32, 32), &mut rng(seed));
            let g = Deformation::translation(x.shape(), &[1.0, 0.0]).unwrap();
            let raw = lipschitz_ratio(FeatureMap::Raw, &x, &g, &b).unwrap().ratio;
            let sc = lipschitz_ratio(FeatureMap::ScatterM2, &x, &g, &b).unwrap().ratio;
            assert!(raw > sc, "{raw} vs {sc}");
        }
    }

    #[test]
    fn dilation_hurts_fourier_modulus_more() {
        let b = bank(3, 32);
        let x = texture(32, &mut rng(6));
        let g = Deformation::dilation(x.shape(), 0.01).unwrap();
        let sc = lipschitz_ratio(FeatureMap::ScatterM2, &x, &g, &b).unwrap().ratio;
        let fm = lipschitz_ratio(FeatureMap::FourierModulus, &x, &g, &b)
            .unwrap()
            .ratio;
        assert!(sc < fm, "{sc} vs {fm}");
    }

    #[test]
    fn invariance_profiles() {
        let b = bank(5, 32);
        let x = texture(32, &mut rng(7));
        let zeros = vec![Deformation::zero(x.shape()); 3];
        let p = invariance_profile(FeatureMap::ScatterM2, &x, &zeros, &b, 0.05).unwrap();
        assert!(p.rows.iter().all(|r| r.relative_change == 0.0));
        assert!(invariance_profile(FeatureMap::Raw, &x, &[], &b, 0.05).is_err());

        let shifts: Vec<Deformation> = (1..=8)
            .map(|s| Deformation::translation(x.shape(), &[s as f64, 0.0]).unwrap())
            .collect();
        let sc = invariance_profile(FeatureMap::ScatterM2, &x, &shifts, &b, 0.05).unwrap();
        let raw = invariance_profile(FeatureMap::Raw, &x, &shifts, &b, 0.05).unwrap();
        assert!(raw.radius < sc.radius, "{} vs {}", raw.radius, sc.radius);
    }

    #[test]
    fn experiment_is_deterministic_and_ordered() {
        let cfg = StabilityConfig {
            signals: 2,
            families: vec![
                Family::Zero,
                Family::RandomSmooth {
                    count: 2,
                    max_gradient: 0.02,
                    smoothness: 4.0,
                },
            ],
            feature_maps: vec![FeatureMap::FourierModulus, FeatureMap::ScatterM1],
            ..StabilityConfig::default()
        };
        let a = stability_experiment(&cfg).unwrap();
        let b = stability_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 2 * 3 * 2);
        let zero = a.aggregate("zero", FeatureMap::ScatterM1).unwrap();
        assert_eq!(zero.max_ratio, 0.0);
        assert!(a.rows.windows(2).all(|w| w[0].signal <= w[1].signal));
        assert!(a.rows.iter().all(|r| r.measure.ratio >= 0.0));
        assert_eq!(a.to_csv().lines().count(), 1 + a.rows.len());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
