//! Batch feature extraction and the seeded digit-classification experiment.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::FeatureMatrix;
use crate::dataset::{load_idx, FileDigest, LabeledDataset};
use crate::error::{Result, ScatterError};
use crate::filterbank::{build_bank, BankConfig, FilterBank};
use crate::io_util::write_file;
use crate::linear::{evaluate, majority_error, train_linear, tune_lambda, LinearModel};
use crate::scattering::{path_enumerate, path_enumerate_all, scatter, ScatterConfig};
use crate::signal::{Shape, Signal};

/// Environment variable capping extraction threads (`0` or unset: rayon's
/// default).
pub const THREADS_ENV: &str = "SCATTERKIT_THREADS";

/// Thread cap from [`THREADS_ENV`].
pub fn thread_cap() -> Result<Option<usize>> {
    parse_thread_cap(std::env::var(THREADS_ENV).ok().as_deref())
}

fn parse_thread_cap(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(ScatterError::InvalidConfig(format!(
                "{THREADS_ENV} must be a nonnegative integer, got {v:?}"
            ))),
        },
    }
}

/// Column layout of scattering features for a config: path table and the
/// shape of each entry.
pub fn feature_layout(config: &ScatterConfig) -> Result<(Vec<crate::scattering::PathIndex>, Shape)> {
    config.validate()?;
    let paths = if config.all_paths {
        path_enumerate_all(config.bank.j, config.bank.k, config.max_order)
    } else {
        path_enumerate(config.bank.j, config.bank.k, config.max_order)?
    };
    let f = config.output_factor();
    let shape = match config.bank.grid {
        Shape::D1(n) => Shape::D1(n / f),
        Shape::D2(h, w) => Shape::D2(h / f, w / f),
    };
    Ok((paths, shape))
}

/// Scattering feature vectors, one row per sample in input order. Uses
/// [`thread_cap`] to size the worker pool.
pub fn extract_features(
    samples: &[Signal],
    config: &ScatterConfig,
    bank: &FilterBank,
) -> Result<FeatureMatrix> {
    extract_features_with_threads(samples, config, bank, thread_cap()?)
}

/// As [`extract_features`] with an explicit thread count (`Some(1)` runs
/// serially on the calling thread).
pub fn extract_features_with_threads(
    samples: &[Signal],
    config: &ScatterConfig,
    bank: &FilterBank,
    threads: Option<usize>,
) -> Result<FeatureMatrix> {
    let (paths, entry_shape) = feature_layout(config)?;
    let cols = paths.len() * entry_shape.len();
    let one = |x: &Signal| scatter(x, config, bank).map(|c| c.feature_vector());
    let rows = match threads {
        Some(1) => samples.iter().map(one).collect::<Result<Vec<_>>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ScatterError::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| samples.par_iter().map(one).collect::<Result<Vec<_>>>())?,
        None => samples.par_iter().map(one).collect::<Result<Vec<_>>>()?,
    };
    FeatureMatrix::from_rows(rows, cols)?.with_paths(paths, entry_shape)
}

/// Pixel values (real parts) as features.
pub fn raw_features(samples: &[Signal]) -> Result<FeatureMatrix> {
    let cols = samples.first().map_or(0, Signal::len);
    FeatureMatrix::from_rows(samples.iter().map(Signal::real_parts).collect(), cols)
}

/// Scattering features of a dataset with its labels attached.
pub fn extract_dataset(
    ds: &LabeledDataset,
    config: &ScatterConfig,
    bank: &FilterBank,
) -> Result<FeatureMatrix> {
    extract_features(ds.samples(), config, bank)?.with_labels(ds.labels().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Separate test files; without them the test set is drawn from the
    /// same pool as the training set, disjoint from it.
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub max_order: usize,
    pub oversampling: usize,
    pub lambdas: Vec<f64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// 1000 training digits (200 held out for choosing lambda), 500 test
    /// digits, `J = 3`, `K = 8`, second order.
    pub fn desk_scale(images: PathBuf, labels: PathBuf, out_dir: PathBuf) -> Self {
        ExperimentConfig {
            seed: 0,
            images,
            labels,
            test_images: None,
            test_labels: None,
            train_size: 1000,
            validation_size: 200,
            test_size: 500,
            j: 3,
            k: 8,
            max_order: 2,
            oversampling: 0,
            lambdas: vec![1e-4, 1e-2, 1.0],
            out_dir,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.validation_size == 0 || self.validation_size >= self.train_size {
            return Err(ScatterError::InvalidConfig(format!(
                "validation size {} must be in 1..{}",
                self.validation_size, self.train_size
            )));
        }
        if self.test_size == 0 {
            return Err(ScatterError::InvalidConfig("test size must be positive".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| l.is_nan() || *l < 0.0) {
            return Err(ScatterError::InvalidConfig(
                "lambda grid must be nonempty and >= 0".into(),
            ));
        }
        if self.test_images.is_some() != self.test_labels.is_some() {
            return Err(ScatterError::InvalidConfig(
                "test images and test labels must be given together".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub feature_dim: usize,
    pub lambda: f64,
    pub validation_errors: Vec<(f64, f64)>,
    pub train_error: f64,
    pub test_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub class_count: usize,
    pub provenance: Vec<FileDigest>,
    pub scattering: ClassifierResult,
    pub raw_pixels: ClassifierResult,
    pub majority_test_error: f64,
}

/// Tunes lambda on the held-out tail of the training set, refits on the
/// whole training set and measures test error.
pub fn fit_and_score(
    train: &FeatureMatrix,
    train_labels: &[usize],
    test: &FeatureMatrix,
    test_labels: &[usize],
    class_count: usize,
    validation_size: usize,
    lambdas: &[f64],
) -> Result<(LinearModel, ClassifierResult)> {
    let fit_n = train.rows() - validation_size;
    let slice = |m: &FeatureMatrix, range: std::ops::Range<usize>| {
        FeatureMatrix::from_rows(range.map(|i| m.row(i).to_vec()).collect(), m.cols())
    };
    let fit = slice(train, 0..fit_n)?;
    let val = slice(train, fit_n..train.rows())?;
    let tuning = tune_lambda(
        &fit,
        &train_labels[..fit_n],
        &val,
        &train_labels[fit_n..],
        class_count,
        lambdas,
    )?;
    let model = train_linear(train, train_labels, class_count, tuning.lambda)?;
    let result = ClassifierResult {
        feature_dim: train.cols(),
        lambda: tuning.lambda,
        validation_errors: tuning.validation_errors,
        train_error: evaluate(&model, train, train_labels)?,
        test_error: evaluate(&model, test, test_labels)?,
    };
    Ok((model, result))
}

fn load_splits(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset, Vec<FileDigest>)> {
    let pool = load_idx(&cfg.images, &cfg.labels)?;
    match (&cfg.test_images, &cfg.test_labels) {
        (Some(ti), Some(tl)) => {
            let test_pool = load_idx(ti, tl)?;
            let train = pool.seeded_split(cfg.seed, &[cfg.train_size])?.remove(0);
            let test = test_pool
                .seeded_split(cfg.seed.wrapping_add(1), &[cfg.test_size])?
                .remove(0);
            let mut prov = pool.provenance().to_vec();
            prov.extend_from_slice(test_pool.provenance());
            Ok((train, test, prov))
        }
        _ => {
            let mut parts = pool.seeded_split(cfg.seed, &[cfg.train_size, cfg.test_size])?;
            let test = parts.pop().expect("two parts");
            let train = parts.pop().expect("two parts");
            Ok((train, test, pool.provenance().to_vec()))
        }
    }
}

/// Runs the digit experiment and writes `features_train.skfm`,
/// `features_test.skfm`, `metrics.json` and `config.json` to the output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentMetrics> {
    cfg.validate()?;
    let (train, test, provenance) = load_splits(cfg)?;
    let shape = train
        .shape()
        .ok_or_else(|| ScatterError::invalid("empty training set"))?;
    let (h, w) = shape.rows_cols();
    let mut bank_cfg = BankConfig::new_2d(cfg.j, h, w).with_k(cfg.k);
    bank_cfg.validate()?;
    let bank = build_bank(&bank_cfg)?;
    bank_cfg = bank.config().clone();
    let scfg = ScatterConfig {
        max_order: cfg.max_order,
        oversampling: cfg.oversampling,
        ..ScatterConfig::new(bank_cfg)
    };
    let class_count = train.class_count().max(test.class_count());

    let s_train = extract_dataset(&train, &scfg, &bank)?;
    let s_test = extract_dataset(&test, &scfg, &bank)?;
    let (_, scattering) = fit_and_score(
        &s_train,
        train.labels(),
        &s_test,
        test.labels(),
        class_count,
        cfg.validation_size,
        &cfg.lambdas,
    )?;
    let (_, raw_pixels) = fit_and_score(
        &raw_features(train.samples())?,
        train.labels(),
        &raw_features(test.samples())?,
        test.labels(),
        class_count,
        cfg.validation_size,
        &cfg.lambdas,
    )?;
    let metrics = ExperimentMetrics {
        seed: cfg.seed,
        train_size: train.len(),
        test_size: test.len(),
        class_count,
        provenance,
        scattering,
        raw_pixels,
        majority_test_error: majority_error(train.labels(), test.labels(), class_count),
    };

    let out = &cfg.out_dir;
    s_train.write(&out.join("features_train.skfm"))?;
    s_test.write(&out.join("features_test.skfm"))?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_json(&out.join("config.json"), cfg)?;
    Ok(metrics)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| ScatterError::invalid(format!("serialization failed: {e}")))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}
