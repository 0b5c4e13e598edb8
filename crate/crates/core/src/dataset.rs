//! IDX ingestion (the MNIST file format) and labeled datasets.
//!
//! IDX files start with a big-endian magic word `0x0000_08DD` where `DD` is
//! the number of dimensions, followed by one big-endian `u32` per dimension
//! and the raw unsigned bytes. Files may be gzip-compressed.
//!
//! Images are scaled to `[0, 1]` and zero-padded, centered, to the smallest
//! power-of-two side strictly larger than the original (28 becomes 32), so
//! every digit has a blank margin on the periodic grid.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ScatterError};
use crate::io_util::read_file;
use crate::signal::{Shape, Signal};
use crate::synth;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        FileDigest {
            path: path.to_path_buf(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<Signal>,
    labels: Vec<usize>,
    class_count: usize,
    provenance: Vec<FileDigest>,
}

impl LabeledDataset {
    /// Checks that every sample shares one grid and that labels are below
    /// `class_count`.
    pub fn new(samples: Vec<Signal>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(ScatterError::Consistency(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(ScatterError::invalid("class count must be positive"));
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|s| s.shape() != first.shape()) {
                return Err(ScatterError::Consistency("samples have different grids".into()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(ScatterError::Consistency(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(LabeledDataset {
            samples,
            labels,
            class_count,
            provenance: Vec::new(),
        })
    }

    pub fn samples(&self) -> &[Signal] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn provenance(&self) -> &[FileDigest] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Grid shared by all samples, if any.
    pub fn shape(&self) -> Option<Shape> {
        self.samples.first().map(|s| s.shape())
    }

    /// The samples at `indices`, in that order. Provenance is kept.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(ScatterError::invalid(format!(
                "index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Ok(LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            provenance: self.provenance.clone(),
        })
    }

    /// Disjoint random subsets of the requested sizes, drawn from a seeded
    /// permutation.
    pub fn seeded_split(&self, seed: u64, sizes: &[usize]) -> Result<Vec<LabeledDataset>> {
        let total: usize = sizes.iter().sum();
        if total > self.len() {
            return Err(ScatterError::invalid(format!(
                "requested {total} samples from a dataset of {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut synth::rng(seed));
        let mut start = 0;
        sizes
            .iter()
            .map(|&n| {
                let part = self.subset(&order[start..start + n]);
                start += n;
                part
            })
            .collect()
    }
}

/// Side of the padded grid: the smallest power of two strictly greater
/// than `n`.
pub fn padded_side(n: usize) -> usize {
    (n + 1).next_power_of_two()
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn decompress(path: &Path, raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| ScatterError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn truncated(path: &Path, what: &str) -> ScatterError {
    ScatterError::io(
        path,
        std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("file truncated in {what}"),
        ),
    )
}

/// Parses an IDX tensor, checking the magic word. Returns the dimensions and
/// the payload.
fn parse_idx<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(truncated(path, "the magic number"));
    }
    let got = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if got != magic {
        return Err(ScatterError::Format {
            path: path.to_path_buf(),
            message: format!(
                "bad IDX magic: expected {magic:#010x}, found bytes [{}]",
                hex(&bytes[..4])
            ),
        });
    }
    let ndim = (magic & 0xff) as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(truncated(path, "the header"));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let len: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < len {
        return Err(truncated(path, "the data section"));
    }
    if payload.len() > len {
        return Err(ScatterError::Format {
            path: path.to_path_buf(),
            message: format!("{} trailing bytes after the data section", payload.len() - len),
        });
    }
    Ok((dims, payload))
}

/// Header of an IDX image file: `(count, rows, cols)`.
pub fn read_idx_image_header(path: &Path) -> Result<(usize, usize, usize)> {
    let bytes = decompress(path, read_file(path)?)?;
    let (dims, _) = parse_idx(path, &bytes, IMAGES_MAGIC)?;
    Ok((dims[0], dims[1], dims[2]))
}

/// Loads an image/label IDX pair. Pixels become `[0, 1]` reals on a padded
/// power-of-two grid; the class count is the largest label plus one.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let img_raw = read_file(images)?;
    let lab_raw = read_file(labels)?;
    let provenance = vec![FileDigest::of(images, &img_raw), FileDigest::of(labels, &lab_raw)];
    let img = decompress(images, img_raw)?;
    let lab = decompress(labels, lab_raw)?;
    let (idims, pixels) = parse_idx(images, &img, IMAGES_MAGIC)?;
    let (ldims, label_bytes) = parse_idx(labels, &lab, LABELS_MAGIC)?;
    let (count, rows, cols) = (idims[0], idims[1], idims[2]);
    if ldims[0] != count {
        return Err(ScatterError::Consistency(format!(
            "{} holds {count} images but {} holds {} labels",
            images.display(),
            labels.display(),
            ldims[0]
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(ScatterError::Format {
            path: images.to_path_buf(),
            message: format!("empty {rows}x{cols} images"),
        });
    }
    let target = Shape::D2(padded_side(rows), padded_side(cols));
    let (tr, tc) = target.rows_cols();
    let offset = [(tr - rows) / 2, (tc - cols) / 2];
    let samples = pixels
        .chunks_exact(rows * cols)
        .map(|px| {
            let vals: Vec<f64> = px.iter().map(|&p| p as f64 / 255.0).collect();
            Signal::from_real(Shape::D2(rows, cols), &vals)?.zero_pad(target, &offset)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels_vec: Vec<usize> = label_bytes.iter().map(|&l| l as usize).collect();
    let class_count = labels_vec.iter().copied().max().map_or(1, |m| m + 1);
    let mut ds = LabeledDataset::new(samples, labels_vec, class_count)?;
    ds.provenance = provenance;
    Ok(ds)
}

/// Encodes images and labels as an uncompressed IDX pair. Used to build
/// fixtures.
pub fn encode_idx(images: &[Vec<u8>], rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = IMAGES_MAGIC.to_be_bytes().to_vec();
    for d in [images.len(), rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = LABELS_MAGIC.to_be_bytes().to_vec();
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
