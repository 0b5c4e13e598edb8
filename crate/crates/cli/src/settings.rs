//! Flat `key = value` config files merged under command-line flags.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value      # trailing comments are allowed
//! ```
//!
//! Keys are case-insensitive and `-` and `_` are interchangeable, so
//! `max-order`, `max_order` and `MAX_ORDER` name the same setting. A value may
//! be wrapped in double quotes. A flag given on the command line always wins
//! over the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::Failure;

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
    source: Option<PathBuf>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::data(format!("cannot read config file {}: {e}", path.display())))?;
        let mut s = Settings::parse(&text, path)?;
        s.source = Some(path.to_path_buf());
        Ok(s)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| {
                Failure::usage(format!(
                    "{}:{}: expected `key = value`, found {content:?}",
                    origin.display(),
                    n + 1
                ))
            })?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Failure::usage(format!(
                    "{}:{}: empty key",
                    origin.display(),
                    n + 1
                )));
            }
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            if values.insert(key.clone(), v.to_string()).is_some() {
                return Err(Failure::usage(format!(
                    "{}:{}: duplicate key {key:?}",
                    origin.display(),
                    n + 1
                )));
            }
        }
        Ok(Settings {
            values,
            used: BTreeSet::new(),
            source: None,
        })
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        let key = normalize(key);
        let from_file = self.values.get(&key).cloned();
        if from_file.is_some() {
            self.used.insert(key.clone());
        }
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Failure::usage(format!("config key {key:?}: cannot parse {v:?}: {e}"))),
        }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.opt(key, flag)?
            .ok_or_else(|| Failure::usage(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    /// Boolean switch: a flag turns it on, otherwise the file decides.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, Failure> {
        self.get(key, flag.then_some(true), false)
    }

    /// Rejects file keys no setting consumed.
    pub fn finish(self) -> Result<(), Failure> {
        let unknown: Vec<&String> = self.values.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Failure::usage(format!(
                "unknown keys in config file {}: {}",
                self.source.as_deref().unwrap_or(Path::new("?")).display(),
                unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )))
        }
    }
}

/// Comma-separated list value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}
