//! Feature matrices and the on-disk formats for features and filter banks.
//!
//! All binary formats are little-endian.
//!
//! Feature container (`.skfm`):
//!
//! | field        | type                                         |
//! |--------------|----------------------------------------------|
//! | magic        | `b"SKFM"`                                    |
//! | version      | `u32` (1)                                    |
//! | rows, cols   | `u64`, `u64`                                 |
//! | entry shape  | `u32` dim (0 = none), `u32` height, `u32` width |
//! | path count   | `u32`, then per path `u16` length + UTF-8 name |
//! | has labels   | `u8`, then `rows` x `u32` labels if set      |
//! | data         | `rows * cols` x `f64`, row-major             |
//!
//! Filter-bank container (`.skfb`):
//!
//! | field   | type                                                        |
//! |---------|-------------------------------------------------------------|
//! | magic   | `b"SKFB"`                                                   |
//! | header  | `u32` x 7: version, dim, J, K, height, width, wavelet count |
//! | phi     | `h * w` complex bins as (`f64` re, `f64` im)                |
//! | wavelets| per wavelet `u32` j, `u32` k, then its bins                 |
//!
//! The bank file is accompanied by a JSON sidecar holding the full
//! [`BankConfig`] and the frame diagnostics.

use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::filterbank::{BankConfig, FilterBank, Wavelet};
use crate::io_util::{read_file, write_file};
use crate::scattering::PathIndex;
use crate::signal::{Shape, Spectrum};

/// Dense row-major feature matrix. When built from scattering coefficients
/// it carries the path table and the spatial shape of each entry, so every
/// column can be named.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    paths: Vec<PathIndex>,
    entry_shape: Option<Shape>,
    labels: Option<Vec<usize>>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ScatterError::invalid("feature rows have different lengths"));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
            paths: Vec::new(),
            entry_shape: None,
            labels: None,
        })
    }

    /// Attaches a path table; `paths.len() * entry_shape.len()` must equal
    /// the column count.
    pub fn with_paths(mut self, paths: Vec<PathIndex>, entry_shape: Shape) -> Result<Self> {
        if paths.len() * entry_shape.len() != self.cols {
            return Err(ScatterError::invalid(format!(
                "{} paths of {} samples do not cover {} columns",
                paths.len(),
                entry_shape.len(),
                self.cols
            )));
        }
        self.paths = paths;
        self.entry_shape = Some(entry_shape);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(ScatterError::Consistency(format!(
                "{} labels for {} feature rows",
                labels.len(),
                self.rows
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn paths(&self) -> &[PathIndex] {
        &self.paths
    }

    pub fn entry_shape(&self) -> Option<Shape> {
        self.entry_shape
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Column names: `m1_j0k3` for one-sample entries, `m1_j0k3:5` for the
    /// sixth sample of a larger entry, `f12` without a path table.
    pub fn column_names(&self) -> Vec<String> {
        match self.entry_shape {
            Some(s) if !self.paths.is_empty() => self
                .paths
                .iter()
                .flat_map(|p| {
                    (0..s.len()).map(move |i| {
                        if s.len() == 1 {
                            p.to_string()
                        } else {
                            format!("{p}:{i}")
                        }
                    })
                })
                .collect(),
            _ => (0..self.cols).map(|i| format!("f{i}")).collect(),
        }
    }

    /// CSV with a header row; a leading `label` column when labels are set.
    /// Values use shortest round-trip exponent notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = self.column_names();
        if self.labels.is_some() {
            header.insert(0, "label".into());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.rows {
            let mut fields: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            if let Some(l) = &self.labels {
                fields.insert(0, l[i].to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + self.data.len() * 8);
        b.extend_from_slice(b"SKFM");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&(self.rows as u64).to_le_bytes());
        b.extend_from_slice(&(self.cols as u64).to_le_bytes());
        let (dim, h, w) = match self.entry_shape {
            None => (0, 0, 0),
            Some(Shape::D1(n)) => (1, 1, n),
            Some(Shape::D2(h, w)) => (2, h, w),
        };
        for v in [dim, h, w, self.paths.len()] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for p in &self.paths {
            let name = p.to_string();
            b.extend_from_slice(&(name.len() as u16).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
        }
        match &self.labels {
            Some(l) => {
                b.push(1);
                for &v in l {
                    b.extend_from_slice(&(v as u32).to_le_bytes());
                }
            }
            None => b.push(0),
        }
        for v in &self.data {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(path, bytes);
        r.magic(b"SKFM")?;
        let version = r.u32()?;
        if version != 1 {
            return Err(r.error(format!("unsupported feature container version {version}")));
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        // reject impossible sizes before allocating
        let cells = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| r.error(format!("header claims {rows}x{cols} values")))?;
        let (dim, h, w) = (r.u32()?, r.u32()? as usize, r.u32()? as usize);
        let entry_shape = match dim {
            0 => None,
            1 => Some(Shape::D1(w)),
            2 => Some(Shape::D2(h, w)),
            d => return Err(r.error(format!("bad entry dimension {d}"))),
        };
        let npaths = r.u32()? as usize;
        let paths = (0..npaths)
            .map(|_| {
                let len = r.u16()? as usize;
                let name = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| r.error("path name is not UTF-8".into()))?
                    .to_string();
                name.parse::<PathIndex>()
                    .map_err(|_| r.error(format!("bad path name {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = match r.u8()? {
            0 => None,
            1 => {
                let mut labels = Vec::new();
                for _ in 0..rows {
                    labels.push(r.u32()? as usize);
                }
                Some(labels)
            }
            f => return Err(r.error(format!("bad label flag {f}"))),
        };
        let data = (0..cells).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let mut m = FeatureMatrix {
            rows,
            cols,
            data,
            paths: Vec::new(),
            entry_shape: None,
            labels,
        };
        if let Some(s) = entry_shape {
            m = m.with_paths(paths, s).map_err(|e| ScatterError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        FeatureMatrix::from_bytes(path, &read_file(path)?)
    }
}

/// Cursor over a binary container that reports truncation as a format error.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    fn error(&self, message: String) -> ScatterError {
        ScatterError::Format {
            path: self.path.to_path_buf(),
            message,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != m {
            return Err(self.error(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(m)
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankSidecar {
    pub config: BankConfig,
    pub frame_bounds: (f64, f64),
    pub wavelet_gain: f64,
    pub warnings: Vec<String>,
    pub wavelets: usize,
}

fn push_bins(b: &mut Vec<u8>, s: &Spectrum) {
    for v in s.values() {
        b.extend_from_slice(&v.re.to_le_bytes());
        b.extend_from_slice(&v.im.to_le_bytes());
    }
}

pub fn bank_to_bytes(bank: &FilterBank) -> Vec<u8> {
    let c = bank.config();
    let (h, w) = c.grid.rows_cols();
    let mut b = b"SKFB".to_vec();
    for v in [1, c.dim(), c.j, c.k, h, w, bank.wavelets().len()] {
        b.extend_from_slice(&(v as u32).to_le_bytes());
    }
    push_bins(&mut b, bank.phi());
    for wv in bank.wavelets() {
        b.extend_from_slice(&(wv.j as u32).to_le_bytes());
        b.extend_from_slice(&(wv.k as u32).to_le_bytes());
        push_bins(&mut b, &wv.spectrum);
    }
    b
}

pub fn bank_sidecar(bank: &FilterBank) -> BankSidecar {
    BankSidecar {
        config: bank.config().clone(),
        frame_bounds: bank.frame_bounds(),
        wavelet_gain: bank.wavelet_gain(),
        warnings: bank.warnings().to_vec(),
        wavelets: bank.wavelets().len(),
    }
}

/// Writes `<path>` (binary) and `<path>.json` (sidecar).
pub fn write_bank(bank: &FilterBank, path: &Path) -> Result<()> {
    write_file(path, &bank_to_bytes(bank))?;
    let json = serde_json::to_string_pretty(&bank_sidecar(bank)).expect("sidecar serializes");
    write_file(&sidecar_path(path), json.as_bytes())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

/// Reads a bank written by [`write_bank`]. The sidecar supplies the full
/// config; the binary header must agree with it.
pub fn read_bank(path: &Path) -> Result<FilterBank> {
    let side_path = sidecar_path(path);
    let side: BankSidecar =
        serde_json::from_slice(&read_file(&side_path)?).map_err(|e| ScatterError::Format {
            path: side_path.clone(),
            message: e.to_string(),
        })?;
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    r.magic(b"SKFB")?;
    let header: Vec<usize> = (0..7)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let c = &side.config;
    let (h, w) = c.grid.rows_cols();
    if header != [1, c.dim(), c.j, c.k, h, w, side.wavelets] {
        return Err(r.error(format!("header {header:?} disagrees with the sidecar")));
    }
    let shape = c.grid;
    let bins = |r: &mut Reader| -> Result<Spectrum> {
        let vals = (0..shape.len())
            .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        Spectrum::new(shape, vals)
    };
    let phi = bins(&mut r)?;
    let psis = (0..side.wavelets)
        .map(|_| {
            let j = r.u32()? as usize;
            let k = r.u32()? as usize;
            Ok(Wavelet {
                j,
                k,
                spectrum: bins(&mut r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let mut bank = FilterBank::from_spectra(side.config.clone(), phi, psis)?;
    bank.set_wavelet_gain(side.wavelet_gain);
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::build_bank;

    fn sample() -> FeatureMatrix {
        FeatureMatrix::from_rows(vec![vec![1.0, -2.5, 0.0, 1e-300], vec![3.0, 4.0, 5.0, 6.0]], 4)
            .unwrap()
            .with_paths(
                vec![PathIndex::root(), PathIndex::new(vec![(0, 1)])],
                Shape::D2(1, 2),
            )
            .unwrap()
            .with_labels(vec![7, 2])
            .unwrap()
    }

    #[test]
    fn feature_container_round_trip() {
        let m = sample();
        let p = Path::new("mem");
        assert_eq!(FeatureMatrix::from_bytes(p, &m.to_bytes()).unwrap(), m);
        let plain = FeatureMatrix::from_rows(vec![vec![0.5; 3]], 3).unwrap();
        assert_eq!(FeatureMatrix::from_bytes(p, &plain.to_bytes()).unwrap(), plain);
        let empty = FeatureMatrix::from_rows(vec![], 3472).unwrap();
        assert_eq!(FeatureMatrix::from_bytes(p, &empty.to_bytes()).unwrap().rows(), 0);
    }

    #[test]
    fn corrupt_containers_are_format_errors() {
        let bytes = sample().to_bytes();
        let p = Path::new("mem");
        for bad in [&bytes[..bytes.len() - 3], &bytes[1..]] {
            assert!(matches!(
                FeatureMatrix::from_bytes(p, bad),
                Err(ScatterError::Format { .. })
            ));
        }
    }

    #[test]
    fn csv_header_uses_path_names() {
        let csv = sample().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "label,m0:0,m0:1,m1_j0k1:0,m1_j0k1:1");
        assert_eq!(lines.next().unwrap(), "7,1e0,-2.5e0,0e0,1e-300");
        let one = FeatureMatrix::from_rows(vec![vec![1.0, 2.0]], 2)
            .unwrap()
            .with_paths(
                vec![PathIndex::root(), PathIndex::new(vec![(1, 2)])],
                Shape::D2(1, 1),
            )
            .unwrap();
        assert_eq!(one.column_names(), vec!["m0", "m1_j1k2"]);
    }

    #[test]
    fn bank_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bank = build_bank(&BankConfig::new_2d(2, 16, 16).with_k(4)).unwrap();
        let path = dir.path().join("bank.skfb");
        write_bank(&bank, &path).unwrap();
        let back = read_bank(&path).unwrap();
        assert_eq!(back.config(), bank.config());
        assert_eq!(back.phi(), bank.phi());
        assert_eq!(back.wavelets().len(), bank.wavelets().len());
        for (a, b) in back.wavelets().iter().zip(bank.wavelets()) {
            assert_eq!((a.j, a.k), (b.j, b.k));
            assert_eq!(a.spectrum, b.spectrum);
        }
        assert_eq!(back.frame_bounds(), bank.frame_bounds());
        assert_eq!(back.wavelet_gain(), bank.wavelet_gain());
        std::fs::write(&path, b"SKFBxx").unwrap();
        assert!(matches!(read_bank(&path), Err(ScatterError::Format { .. })));
    }
}
