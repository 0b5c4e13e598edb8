use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::{json, Value};

use scatterkit::container::{read_bank, write_bank, FeatureMatrix};
use scatterkit::dataset::load_idx;
use scatterkit::filterbank::{
    build_bank, raw_morlet, zero_mean_correct, BankConfig, FilterBank, Normalization,
};
use scatterkit::linear::{evaluate, majority_class, predict, train_linear, tune_lambda, LinearModel};
use scatterkit::pipeline::{
    extract_features_with_threads, run_experiment, thread_cap, write_json, ExperimentConfig,
};
use scatterkit::scattering::{scatter, Rho, ScatterConfig};
use scatterkit::stability::{
    invariance_profile, stability_experiment, Deformation, Family, FeatureMap, SignalKind, StabilityConfig,
    DEFAULT_INVARIANCE_THRESHOLD,
};
use scatterkit::timefreq::{cwt, gaussian_signal, hann_window, uncertainty_check, windowed_fourier};
use scatterkit::{synth, Shape, Signal};

use crate::settings::{List, Settings};
use crate::{BankFlags, Common, Failure, TreeFlags};

type Outcome = Result<(), Failure>;

fn echo(command: &str, config: Value) {
    let v = json!({ "command": command, "config": config });
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&v).expect("json value serializes")
    );
}

fn out_dir(s: &mut Settings, common: &Common) -> Result<PathBuf, Failure> {
    s.get("out", common.out.clone(), PathBuf::from("out"))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

/// Resolves bank flags for a grid whose shape is already known.
fn bank_config(s: &mut Settings, f: &BankFlags, grid: Shape) -> Result<BankConfig, Failure> {
    let j = s.get("j", f.j, 3)?;
    let mut cfg = match grid {
        Shape::D1(n) => BankConfig::new_1d(j, n),
        Shape::D2(h, w) => BankConfig::new_2d(j, h, w),
    };
    cfg.k = s.get("k", f.k, cfg.k)?;
    cfg.xi = s.get("xi", f.xi, cfg.xi)?;
    cfg.sigma = s.get("sigma", f.sigma, cfg.sigma)?;
    cfg.slant = s.get("slant", f.slant, cfg.slant)?;
    let norm: Option<String> = s.opt("normalization", f.normalization.clone())?;
    if let Some(n) = norm {
        cfg.normalization = n
            .parse::<Normalization>()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn tree_config(s: &mut Settings, f: &TreeFlags, bank: BankConfig) -> Result<ScatterConfig, Failure> {
    let mut cfg = ScatterConfig::new(bank);
    cfg.max_order = s.get("max_order", f.max_order, cfg.max_order)?;
    cfg.oversampling = s.get("oversampling", f.oversampling, cfg.oversampling)?;
    let rho: Option<String> = s.opt("rho", f.rho.clone())?;
    if let Some(r) = rho {
        cfg.rho = r.parse::<Rho>().map_err(|e| Failure::usage(e.to_string()))?;
    }
    cfg.all_paths = s.switch("all_paths", f.all_paths)?;
    cfg.intermediate_subsampling = s.switch("intermediate_subsampling", f.intermediate_subsampling)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Either a bank file or a bank built from flags for `grid`.
fn resolve_bank(
    s: &mut Settings,
    bank_path: Option<PathBuf>,
    flags: &BankFlags,
    grid: Shape,
) -> Result<FilterBank, Failure> {
    match s.opt::<PathBuf>("bank", bank_path)? {
        Some(p) => {
            let bank = read_bank(&p)?;
            if bank.grid() != grid {
                return Err(Failure::data(format!(
                    "bank {} is built for a {} grid but the input is {}",
                    p.display(),
                    bank.grid(),
                    grid
                )));
            }
            Ok(bank)
        }
        None => Ok(build_bank(&bank_config(s, flags, grid)?)?),
    }
}

/// Whitespace- or comma-separated numbers; one line is a 1D signal, several
/// equal-length lines a 2D image.
fn read_numeric(path: &Path) -> Result<Signal, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let vals = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Failure::data(format!("{}:{}: not a number: {t:?}", path.display(), n + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !vals.is_empty() {
            rows.push(vals);
        }
    }
    let Some(first) = rows.first() else {
        return Err(Failure::data(format!("{} contains no samples", path.display())));
    };
    let cols = first.len();
    if rows.len() == 1 {
        return Ok(Signal::from_real_1d(first)?);
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Failure::data(format!(
            "{}: rows have different lengths",
            path.display()
        )));
    }
    let flat: Vec<f64> = rows.concat();
    Ok(Signal::from_real(Shape::D2(rows.len(), cols), &flat)?)
}

fn matrix_csv(rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Args, Debug)]
pub struct BuildBankArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bank: BankFlags,
    /// Grid side length [default: 32]
    #[arg(long)]
    size: Option<usize>,
    /// 1 or 2 [default: 2]
    #[arg(long)]
    dim: Option<usize>,
}

pub fn build_bank_cmd(a: BuildBankArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let size = s.get("size", a.size, 32)?;
    let grid = match s.get("dim", a.dim, 2)? {
        1 => Shape::D1(size),
        2 => Shape::D2(size, size),
        d => return Err(Failure::usage(format!("--dim must be 1 or 2, got {d}"))),
    };
    let cfg = bank_config(&mut s, &a.bank, grid)?;
    s.finish()?;
    echo("build-bank", json!({ "bank": cfg, "out": out }));
    let bank = build_bank(&cfg)?;
    let path = out.join("bank.skfb");
    write_bank(&bank, &path)?;
    let (lo, hi) = bank.frame_bounds();
    eprintln!(
        "wrote {} ({} wavelets, frame bounds {lo:.6}..{hi:.6})",
        path.display(),
        bank.wavelets().len()
    );
    for w in bank.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct TimefreqArgs {
    #[command(flatten)]
    common: Common,
    /// Text file with one row of samples; without it a test chirp is used
    #[arg(long)]
    input: Option<PathBuf>,
    /// Length of the built-in chirp [default: 256]
    #[arg(long)]
    length: Option<usize>,
    /// wft (windowed Fourier) or cwt (wavelet) [default: wft]
    #[arg(long)]
    transform: Option<String>,
    /// Hann window length for wft [default: 64]
    #[arg(long)]
    window: Option<usize>,
    /// Frame hop for wft; must divide the signal length [default: 8]
    #[arg(long)]
    hop: Option<usize>,
    /// Octaves for cwt [default: 4]
    #[arg(long = "j")]
    j: Option<usize>,
    /// Voices per octave for cwt [default: 4]
    #[arg(long = "k")]
    k: Option<usize>,
    /// Amplitude exponent: scale s carries |s|^-p [default: 1]
    #[arg(long)]
    p: Option<f64>,
}

fn chirp(n: usize) -> Result<Signal, Failure> {
    let nf = n as f64;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / nf;
            (std::f64::consts::PI * (0.05 * nf * t + 0.2 * nf * t * t)).cos()
        })
        .collect();
    Ok(Signal::from_real_1d(&vals)?)
}

pub fn timefreq(a: TimefreqArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let input: Option<PathBuf> = s.opt("input", a.input)?;
    let length = s.get("length", a.length, 256)?;
    let transform = s.get("transform", a.transform, "wft".to_string())?;
    let x = match &input {
        Some(p) => read_numeric(p)?,
        None => chirp(length)?,
    };
    let Shape::D1(n) = x.shape() else {
        return Err(Failure::data(
            "timefreq needs a single row of samples".to_string(),
        ));
    };
    match transform.as_str() {
        "wft" => {
            let window = s.get("window", a.window, 64.min(n))?;
            let hop = s.get("hop", a.hop, 8.min(n))?;
            s.finish()?;
            echo(
                "timefreq",
                json!({ "transform": "wft", "input": input, "length": n, "window": window, "hop": hop, "out": out }),
            );
            let map = windowed_fourier(&x, &hann_window(window)?, hop)?;
            let csv = matrix_csv((0..map.frames()).map(|m| map.frame(m).iter().map(|v| v.norm()).collect()));
            let path = out.join("timefreq.csv");
            write_text(&path, &csv)?;
            eprintln!(
                "wrote {} ({} frames x {} bins, magnitudes)",
                path.display(),
                map.frames(),
                map.bins()
            );
        }
        "cwt" => {
            let j = s.get("j", a.j, 4)?;
            let k = s.get("k", a.k, 4)?;
            let p = s.get("p", a.p, 1.0)?;
            s.finish()?;
            echo(
                "timefreq",
                json!({ "transform": "cwt", "input": input, "length": n, "J": j, "K": k, "p": p, "out": out }),
            );
            if k == 0 {
                return Err(Failure::usage("--k must be positive".to_string()));
            }
            let mother = zero_mean_correct(&raw_morlet(&BankConfig::new_1d(j, n), 1.0, 0.0)?);
            let scales: Vec<f64> = (0..j * k).map(|i| 2f64.powf(i as f64 / k as f64)).collect();
            let map = cwt(&x, &mother, &scales, p)?;
            let csv = matrix_csv((0..scales.len()).map(|r| map.row(r).iter().map(|v| v.norm()).collect()));
            let path = out.join("timefreq.csv");
            write_text(&path, &csv)?;
            eprintln!(
                "wrote {} ({} scales x {n} samples, magnitudes)",
                path.display(),
                scales.len()
            );
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown transform {other:?} (expected wft or cwt)"
            )))
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ScatterArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bank_flags: BankFlags,
    #[command(flatten)]
    tree: TreeFlags,
    /// Text file: one line per image row (or a single line for 1D)
    #[arg(long)]
    input: Option<PathBuf>,
    /// IDX image file (used with --labels and --index instead of --input)
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file matching --images
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Sample index within the IDX pair [default: 0]
    #[arg(long)]
    index: Option<usize>,
    /// Prebuilt bank file; overrides the bank flags
    #[arg(long)]
    bank: Option<PathBuf>,
}

pub fn scatter_cmd(a: ScatterArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let input: Option<PathBuf> = s.opt("input", a.input)?;
    let images: Option<PathBuf> = s.opt("images", a.images)?;
    let labels: Option<PathBuf> = s.opt("labels", a.labels)?;
    let index = s.get("index", a.index, 0)?;
    let x = match (&input, &images, &labels) {
        (Some(p), None, _) => read_numeric(p)?,
        (None, Some(i), Some(l)) => {
            let ds = load_idx(i, l)?;
            ds.samples().get(index).cloned().ok_or_else(|| {
                Failure::usage(format!("--index {index} out of range ({} samples)", ds.len()))
            })?
        }
        _ => {
            return Err(Failure::usage(
                "give either --input or both --images and --labels".to_string(),
            ))
        }
    };
    let bank = resolve_bank(&mut s, a.bank, &a.bank_flags, x.shape())?;
    let cfg = tree_config(&mut s, &a.tree, bank.config().clone())?;
    s.finish()?;
    echo(
        "scatter",
        json!({ "input": input, "images": images, "index": index, "scatter": cfg, "out": out }),
    );
    let coeffs = scatter(&x, &cfg, &bank)?;
    let dim = coeffs.entry_shape().len();
    let m = FeatureMatrix::from_rows(vec![coeffs.feature_vector()], coeffs.len() * dim)?
        .with_paths(coeffs.paths().cloned().collect(), coeffs.entry_shape())?;
    m.write(&out.join("scatter.skfm"))?;
    write_text(&out.join("scatter.csv"), &m.to_csv())?;
    let energies: Vec<f64> = (0..=coeffs.max_order()).map(|q| coeffs.order_energy(q)).collect();
    let summary = json!({
        "paths": coeffs.len(),
        "entry_shape": coeffs.entry_shape(),
        "feature_dim": m.cols(),
        "input_energy": x.energy(),
        "order_energy": energies,
        "total_energy": coeffs.total_energy(),
    });
    write_json(&out.join("scatter.json"), &summary)?;
    eprintln!(
        "wrote {} paths x {dim} samples to {}",
        coeffs.len(),
        out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    bank_flags: BankFlags,
    #[command(flatten)]
    tree: TreeFlags,
    /// IDX image file
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Use only the first N samples
    #[arg(long)]
    limit: Option<usize>,
    /// Prebuilt bank file; overrides the bank flags
    #[arg(long)]
    bank: Option<PathBuf>,
    /// bin, csv or both [default: bin]
    #[arg(long)]
    format: Option<String>,
}

pub fn extract(a: ExtractArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let images: PathBuf = s.require("images", a.images)?;
    let labels: PathBuf = s.require("labels", a.labels)?;
    let limit: Option<usize> = s.opt("limit", a.limit)?;
    let format = s.get("format", a.format, "bin".to_string())?;
    if !matches!(format.as_str(), "bin" | "csv" | "both") {
        return Err(Failure::usage(format!(
            "--format must be bin, csv or both, got {format:?}"
        )));
    }
    let mut ds = load_idx(&images, &labels)?;
    if let Some(n) = limit {
        let idx: Vec<usize> = (0..n.min(ds.len())).collect();
        ds = ds.subset(&idx)?;
    }
    let grid = ds
        .shape()
        .ok_or_else(|| Failure::data(format!("{} holds no images", images.display())))?;
    let bank = resolve_bank(&mut s, a.bank, &a.bank_flags, grid)?;
    let cfg = tree_config(&mut s, &a.tree, bank.config().clone())?;
    s.finish()?;
    let threads = thread_cap()?;
    echo(
        "extract",
        json!({
            "images": images, "labels": labels, "limit": limit, "format": format,
            "threads": threads, "scatter": cfg, "out": out,
            "provenance": ds.provenance(),
        }),
    );
    let m = extract_features_with_threads(ds.samples(), &cfg, &bank, threads)?
        .with_labels(ds.labels().to_vec())?;
    if format != "csv" {
        m.write(&out.join("features.skfm"))?;
    }
    if format != "bin" {
        write_text(&out.join("features.csv"), &m.to_csv())?;
    }
    eprintln!(
        "extracted {} x {} features into {}",
        m.rows(),
        m.cols(),
        out.display()
    );
    Ok(())
}

fn labels_of<'a>(m: &'a FeatureMatrix, path: &Path) -> Result<&'a [usize], Failure> {
    m.labels()
        .ok_or_else(|| Failure::data(format!("{} carries no labels", path.display())))
}

fn feature_spec(m: &FeatureMatrix, source: &Path) -> String {
    let mut spec = format!("cols={}; paths={}", m.cols(), m.paths().len());
    if let Some(shape) = m.entry_shape() {
        spec.push_str(&format!("; entry={shape}"));
    }
    if let (Some(first), Some(last)) = (m.paths().first(), m.paths().last()) {
        spec.push_str(&format!("; first={first}; last={last}"));
    }
    spec.push_str(&format!("; source={}", source.display()));
    spec
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Labeled feature file written by extract
    #[arg(long)]
    features: Option<PathBuf>,
    /// Ridge penalty, or a comma-separated grid to tune over [default: 1e-4,1e-2,1]
    #[arg(long)]
    lambda: Option<List<f64>>,
    /// Held-out tail rows used to choose lambda [default: a fifth of the rows]
    #[arg(long)]
    validation_size: Option<usize>,
}

pub fn train(a: TrainArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let features: PathBuf = s.require("features", a.features)?;
    let grid = s.get("lambda", a.lambda, List(vec![1e-4, 1e-2, 1.0]))?.0;
    let validation: Option<usize> = s.opt("validation_size", a.validation_size)?;
    s.finish()?;
    if grid.is_empty() || grid.iter().any(|l| l.is_nan() || *l < 0.0) {
        return Err(Failure::usage("--lambda values must be >= 0".to_string()));
    }
    let m = FeatureMatrix::read(&features)?;
    let labels = labels_of(&m, &features)?;
    let class_count = labels.iter().copied().max().map_or(1, |c| c + 1);
    let validation = if grid.len() > 1 {
        validation.unwrap_or(m.rows() / 5)
    } else {
        0
    };
    echo(
        "train",
        json!({ "features": features, "lambda": grid, "validation_size": validation, "out": out }),
    );
    let lambda = if grid.len() == 1 {
        grid[0]
    } else {
        if validation == 0 || validation >= m.rows() {
            return Err(Failure::usage(format!(
                "validation size {validation} must be in 1..{} to tune lambda",
                m.rows()
            )));
        }
        let fit_n = m.rows() - validation;
        let slice = |r: std::ops::Range<usize>| {
            FeatureMatrix::from_rows(r.map(|i| m.row(i).to_vec()).collect(), m.cols())
        };
        let tuning = tune_lambda(
            &slice(0..fit_n)?,
            &labels[..fit_n],
            &slice(fit_n..m.rows())?,
            &labels[fit_n..],
            class_count,
            &grid,
        )?;
        for (l, e) in &tuning.validation_errors {
            eprintln!("lambda {l:e}: validation error {e:.4}");
        }
        tuning.lambda
    };
    let mut model = train_linear(&m, labels, class_count, lambda)?;
    model.feature_spec = feature_spec(&m, &features);
    let train_error = evaluate(&model, &m, labels)?;
    write_json(&out.join("model.json"), &model)?;
    write_json(
        &out.join("train_metrics.json"),
        &json!({ "rows": m.rows(), "classes": class_count, "lambda": lambda, "train_error": train_error }),
    )?;
    eprintln!("lambda {lambda:e}, training error {train_error:.4}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Model written by train
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled feature file to score
    #[arg(long)]
    features: Option<PathBuf>,
}

pub fn evaluate_cmd(a: EvaluateArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let model_path: PathBuf = s.require("model", a.model)?;
    let features: PathBuf = s.require("features", a.features)?;
    s.finish()?;
    echo(
        "evaluate",
        json!({ "model": model_path, "features": features, "out": out }),
    );
    let text = std::fs::read_to_string(&model_path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", model_path.display())))?;
    let model: LinearModel = serde_json::from_str(&text)
        .map_err(|e| Failure::data(format!("{} is not a model file: {e}", model_path.display())))?;
    let m = FeatureMatrix::read(&features)?;
    let labels = labels_of(&m, &features)?;
    let predicted = predict(&model, &m)?;
    let error = evaluate(&model, &m, labels)?;
    let majority = majority_class(&predicted, model.class_count());
    let metrics = json!({
        "rows": m.rows(),
        "error_rate": error,
        "lambda": model.lambda,
        "feature_spec": model.feature_spec,
        "most_predicted_class": majority,
    });
    write_json(&out.join("metrics.json"), &metrics)?;
    eprintln!("error rate {error:.4} on {} rows", m.rows());
    Ok(())
}

/// Experiment signals and the bank shared by stability and invariance.
#[derive(Args, Debug, Clone)]
pub struct ExperimentSignals {
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Side of the square test images [default: 32]
    #[arg(long)]
    grid: Option<usize>,
    /// Scattering scale J [default: 3]
    #[arg(long = "j")]
    j: Option<usize>,
    /// Number of test signals [default: 10]
    #[arg(long)]
    signals: Option<usize>,
    /// texture, smooth or noise [default: texture]
    #[arg(long)]
    signal_kind: Option<String>,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sig: ExperimentSignals,
    /// Deformation families: random-smooth, dilation, translation, zero
    #[arg(long)]
    families: Option<List<String>>,
    /// Random deformations per signal [default: 20]
    #[arg(long)]
    count: Option<usize>,
    /// Target sup |grad g| of random deformations [default: 0.02]
    #[arg(long)]
    max_gradient: Option<f64>,
    /// Low-pass width of random deformations, in samples [default: 4]
    #[arg(long)]
    smoothness: Option<f64>,
    /// Dilation strengths [default: 0.005,0.01,0.015,0.02]
    #[arg(long)]
    epsilons: Option<List<f64>>,
    /// Horizontal translation offsets in samples [default: 1,2,4]
    #[arg(long)]
    shifts: Option<List<i64>>,
    /// Feature maps: raw, fourier-modulus, scatter-m1, scatter-m2 [default: all]
    #[arg(long)]
    maps: Option<List<String>>,
}

fn parse_maps(names: &[String]) -> Result<Vec<FeatureMap>, Failure> {
    names
        .iter()
        .map(|n| n.parse::<FeatureMap>().map_err(|e| Failure::usage(e.to_string())))
        .collect()
}

fn signal_setup(s: &mut Settings, a: &ExperimentSignals) -> Result<StabilityConfig, Failure> {
    let d = StabilityConfig::default();
    let kind: String = s.get("signal_kind", a.signal_kind.clone(), "texture".to_string())?;
    Ok(StabilityConfig {
        seed: s.get("seed", a.seed, d.seed)?,
        grid: s.get("grid", a.grid, d.grid)?,
        j: s.get("j", a.j, d.j)?,
        signals: s.get("signals", a.signals, d.signals)?,
        signal_kind: kind
            .parse::<SignalKind>()
            .map_err(|e| Failure::usage(e.to_string()))?,
        ..d
    })
}

pub fn stability(a: StabilityArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let mut cfg = signal_setup(&mut s, &a.sig)?;
    let names = s
        .get(
            "families",
            a.families,
            List(vec!["random-smooth".into(), "dilation".into()]),
        )?
        .0;
    let count = s.get("count", a.count, 20)?;
    let max_gradient = s.get("max_gradient", a.max_gradient, 0.02)?;
    let smoothness = s.get("smoothness", a.smoothness, 4.0)?;
    let epsilons = s
        .get("epsilons", a.epsilons, List(vec![0.005, 0.01, 0.015, 0.02]))?
        .0;
    let shifts = s.get("shifts", a.shifts, List(vec![1, 2, 4]))?.0;
    let maps = s.opt("maps", a.maps)?;
    s.finish()?;
    cfg.families = names
        .iter()
        .map(|n| match n.as_str() {
            "random-smooth" => Ok(Family::RandomSmooth {
                count,
                max_gradient,
                smoothness,
            }),
            "dilation" => Ok(Family::Dilation {
                epsilons: epsilons.clone(),
            }),
            "translation" => Ok(Family::Translation {
                shifts: shifts.iter().map(|&v| [0, v]).collect(),
            }),
            "zero" => Ok(Family::Zero),
            other => Err(Failure::usage(format!("unknown deformation family {other:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if let Some(List(m)) = maps {
        cfg.feature_maps = parse_maps(&m)?;
    }
    echo("stability", json!({ "stability": cfg, "out": out }));
    let report = stability_experiment(&cfg)?;
    report.write(&out, "stability")?;
    for agg in &report.aggregates {
        eprintln!(
            "{:<14} {:<16} median {:.4} max {:.4}",
            agg.family,
            agg.feature_map.name(),
            agg.median_ratio,
            agg.max_ratio
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct InvarianceArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sig: ExperimentSignals,
    /// Feature map to profile [default: scatter-m2]
    #[arg(long)]
    map: Option<String>,
    /// Largest horizontal translation in samples [default: 8]
    #[arg(long)]
    max_shift: Option<usize>,
    /// Relative change that ends the invariance radius [default: 0.05]
    #[arg(long)]
    threshold: Option<f64>,
}

pub fn invariance(a: InvarianceArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let cfg = signal_setup(&mut s, &a.sig)?;
    let map = s.get("map", a.map, "scatter-m2".to_string())?;
    let map = map
        .parse::<FeatureMap>()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let max_shift = s.get("max_shift", a.max_shift, 8)?;
    let threshold = s.get("threshold", a.threshold, DEFAULT_INVARIANCE_THRESHOLD)?;
    s.finish()?;
    echo(
        "invariance",
        json!({
            "seed": cfg.seed, "grid": cfg.grid, "J": cfg.j, "signals": cfg.signals,
            "signal_kind": cfg.signal_kind, "map": map, "max_shift": max_shift,
            "threshold": threshold, "out": out,
        }),
    );
    if cfg.grid == 0 || cfg.signals == 0 || max_shift == 0 {
        return Err(Failure::usage(
            "grid, signals and max-shift must be positive".to_string(),
        ));
    }
    let shape = Shape::D2(cfg.grid, cfg.grid);
    let bank = build_bank(&BankConfig::new_2d(cfg.j, cfg.grid, cfg.grid))?;
    let family = (1..=max_shift)
        .map(|v| Deformation::translation(shape, &[0.0, v as f64]))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = synth::rng(cfg.seed);
    let mut csv = String::from("signal,diffeo_norm,relative_change\n");
    let mut radii = Vec::with_capacity(cfg.signals);
    for i in 0..cfg.signals {
        let x = match cfg.signal_kind {
            SignalKind::Texture => synth::texture(cfg.grid, &mut rng),
            SignalKind::Smooth => synth::smooth_image(cfg.grid, &mut rng),
            SignalKind::Noise => synth::white_noise(shape, &mut rng),
        };
        let profile = invariance_profile(map, &x, &family, &bank, threshold)?;
        for r in &profile.rows {
            csv.push_str(&format!("{i},{:e},{:e}\n", r.diffeo_norm, r.relative_change));
        }
        radii.push(profile.radius);
    }
    write_text(&out.join("invariance.csv"), &csv)?;
    write_json(
        &out.join("invariance.json"),
        &json!({ "map": map, "threshold": threshold, "radius": radii }),
    )?;
    eprintln!("invariance radii: {radii:?}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct UncertaintyArgs {
    #[command(flatten)]
    common: Common,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Signal length [default: 1024]
    #[arg(long)]
    length: Option<usize>,
    /// Number of random test signals [default: 50]
    #[arg(long)]
    count: Option<usize>,
}

pub fn uncertainty(a: UncertaintyArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let seed = s.get("seed", a.seed, 0)?;
    let n = s.get("length", a.length, 1024)?;
    let count = s.get("count", a.count, 50)?;
    s.finish()?;
    echo(
        "uncertainty",
        json!({ "seed": seed, "length": n, "count": count, "out": out }),
    );
    if n < 16 {
        return Err(Failure::usage("--length must be at least 16".to_string()));
    }
    let mut rng = synth::rng(seed);
    let mut family = synth::spread_family(n, count, &mut rng);
    family.push(gaussian_signal(n, n as f64 / 32.0)?);
    let report = uncertainty_check(&family)?;
    write_json(&out.join("uncertainty.json"), &report)?;
    eprintln!(
        "min product {:.6} vs Gaussian reference {:.6}: {}",
        report.min_product,
        report.reference,
        if report.holds() { "holds" } else { "violated" }
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// IDX image file for the training pool
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file for the training pool
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Separate IDX test images (otherwise the test set comes from the pool)
    #[arg(long)]
    test_images: Option<PathBuf>,
    /// Separate IDX test labels
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// RNG seed for the splits [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Training digits, validation included [default: 1000]
    #[arg(long)]
    train_size: Option<usize>,
    /// Training digits held out to choose lambda [default: 200]
    #[arg(long)]
    validation_size: Option<usize>,
    /// Test digits [default: 500]
    #[arg(long)]
    test_size: Option<usize>,
    /// Scattering scale [default: 3]
    #[arg(long = "j")]
    j: Option<usize>,
    /// Orientations [default: 8]
    #[arg(long = "k")]
    k: Option<usize>,
    /// Scattering order [default: 2]
    #[arg(long)]
    max_order: Option<usize>,
    /// Output oversampling [default: 0]
    #[arg(long)]
    oversampling: Option<usize>,
    /// Ridge grid [default: 1e-4,1e-2,1]
    #[arg(long)]
    lambda: Option<List<f64>>,
}

pub fn experiment(a: ExperimentArgs) -> Outcome {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = out_dir(&mut s, &a.common)?;
    let images: PathBuf = s.require("images", a.images)?;
    let labels: PathBuf = s.require("labels", a.labels)?;
    let mut cfg = ExperimentConfig::desk_scale(images, labels, out);
    cfg.test_images = s.opt("test_images", a.test_images)?;
    cfg.test_labels = s.opt("test_labels", a.test_labels)?;
    cfg.seed = s.get("seed", a.seed, cfg.seed)?;
    cfg.train_size = s.get("train_size", a.train_size, cfg.train_size)?;
    cfg.validation_size = s.get("validation_size", a.validation_size, cfg.validation_size)?;
    cfg.test_size = s.get("test_size", a.test_size, cfg.test_size)?;
    cfg.j = s.get("j", a.j, cfg.j)?;
    cfg.k = s.get("k", a.k, cfg.k)?;
    cfg.max_order = s.get("max_order", a.max_order, cfg.max_order)?;
    cfg.oversampling = s.get("oversampling", a.oversampling, cfg.oversampling)?;
    cfg.lambdas = s.get("lambda", a.lambda, List(cfg.lambdas.clone()))?.0;
    s.finish()?;
    echo(
        "experiment",
        serde_json::to_value(&cfg).expect("config serializes"),
    );
    let m = run_experiment(&cfg)?;
    eprintln!(
        "test error: scattering {:.4} (lambda {:e}), raw pixels {:.4} (lambda {:e}), majority {:.4}",
        m.scattering.test_error,
        m.scattering.lambda,
        m.raw_pixels.test_error,
        m.raw_pixels.lambda,
        m.majority_test_error
    );
    Ok(())
}
