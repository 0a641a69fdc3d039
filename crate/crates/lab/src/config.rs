//! Flat `key = value` configuration.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Vectors are comma-separated (`theta = 1.3893, 1.5`); matrices separate
//! rows with `;` (`a = 1, 0; 0, 40`). Later entries override earlier ones,
//! and `--set key=value` overrides the file. `SURECVLAB_SEED` overrides
//! `master_seed` from the file but not from `--set`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use surecvlab_core::{DMatrix, DVector};

use crate::LabError;

/// Environment variable overriding `master_seed`.
pub const SEED_ENV: &str = "SURECVLAB_SEED";

/// Parsed configuration. Getters record which keys were read so that
/// [`Config::reject_unused`] can name unknown keys.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: Mutex<BTreeSet<String>>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("key '{key}': {msg}"))
}

impl Config {
    /// Parse file contents.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            cfg.set_pair(k, v)?;
        }
        Ok(cfg)
    }

    fn set_pair(&mut self, k: &str, v: &str) -> Result<(), LabError> {
        let k = k.trim();
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(LabError::Config(format!("invalid key '{k}'")));
        }
        self.values.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), LabError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("--set expects key=value, got '{assignment}'")))?;
        self.set_pair(k, v)
    }

    /// Insert `key = value` unless the key is already present.
    pub fn set_default(&mut self, key: &str, value: &str) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    /// Copy of the entries with no keys marked as read.
    pub fn clone_values(&self) -> Config {
        Config { values: self.values.clone(), used: Mutex::default() }
    }

    /// Whether `key` is present (does not mark it used).
    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.lock().expect("config lock").insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    /// Fail on any key no getter asked for.
    pub fn reject_unused(&self) -> Result<(), LabError> {
        let used = self.used.lock().expect("config lock");
        let unknown: Vec<&str> = self.values.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }

    /// Fail on any key not in `known`, naming it.
    pub fn reject_outside(&self, known: &[&str]) -> Result<(), LabError> {
        let unknown: Vec<&str> = self.values.keys().filter(|k| !known.contains(&k.as_str())).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }

    /// String value.
    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    /// Optional string value.
    pub fn opt_string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    /// One of `choices`.
    pub fn choice(&self, key: &str, default: &str, choices: &[&str]) -> Result<String, LabError> {
        let v = self.string(key, default);
        if choices.contains(&v.as_str()) {
            Ok(v)
        } else {
            Err(bad(key, format!("'{v}' is not one of {}", choices.join(", "))))
        }
    }

    /// Real in `[lo, hi]`.
    pub fn f64_in(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64, LabError> {
        let v = match self.raw(key) {
            Some(s) => parse_f64(key, s)?,
            None => default,
        };
        if !(lo..=hi).contains(&v) {
            return Err(bad(key, format!("{v} is outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    /// Integer `>= min`.
    pub fn usize_min(&self, key: &str, default: usize, min: usize) -> Result<usize, LabError> {
        let v = match self.raw(key) {
            Some(s) => parse_usize(key, s)?,
            None => default,
        };
        if v < min {
            return Err(bad(key, format!("{v} must be at least {min}")));
        }
        Ok(v)
    }

    /// Unsigned 64-bit integer.
    pub fn u64(&self, key: &str, default: u64) -> Result<u64, LabError> {
        match self.raw(key) {
            Some(s) => s.parse().map_err(|_| bad(key, format!("'{s}' is not an unsigned 64-bit integer"))),
            None => Ok(default),
        }
    }

    /// Boolean (`true`/`false`).
    pub fn bool(&self, key: &str, default: bool) -> Result<bool, LabError> {
        match self.raw(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(bad(key, format!("'{s}' is not true/false"))),
            None => Ok(default),
        }
    }

    /// Comma-separated reals, if present.
    pub fn opt_vec(&self, key: &str) -> Result<Option<Vec<f64>>, LabError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => parse_list(key, s).map(Some),
        }
    }

    /// Comma-separated positive integers, if present.
    pub fn opt_usizes(&self, key: &str) -> Result<Option<Vec<usize>>, LabError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.split(',').map(|t| parse_usize(key, t.trim())).collect::<Result<Vec<_>, _>>().map(Some),
        }
    }

    /// Comma-separated vector (required).
    pub fn vector(&self, key: &str) -> Result<DVector<f64>, LabError> {
        let v = self.opt_vec(key)?.ok_or_else(|| bad(key, "required"))?;
        Ok(DVector::from_vec(v))
    }

    /// Square matrix of size `k` with `;`-separated rows, or `None` if absent.
    pub fn opt_matrix(&self, key: &str, k: usize) -> Result<Option<DMatrix<f64>>, LabError> {
        let Some(s) = self.raw(key) else { return Ok(None) };
        let rows: Vec<Vec<f64>> = s.split(';').map(|r| parse_list(key, r)).collect::<Result<_, _>>()?;
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(bad(key, format!("expected a {k}x{k} matrix")));
        }
        Ok(Some(DMatrix::from_fn(k, k, |i, j| rows[i][j])))
    }

    /// Master seed: `--set`/file value, with the environment variable taking
    /// precedence over the file.
    pub fn master_seed(&self, from_cli: bool, default: u64) -> Result<u64, LabError> {
        if !from_cli {
            if let Ok(s) = std::env::var(SEED_ENV) {
                self.raw("master_seed");
                return s.trim().parse().map_err(|_| LabError::Config(format!("{SEED_ENV}='{s}' is not a u64")));
            }
        }
        self.u64("master_seed", default)
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, LabError> {
    let v: f64 = s.trim().parse().map_err(|_| bad(key, format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(v)
}

fn parse_usize(key: &str, s: &str) -> Result<usize, LabError> {
    s.trim().parse().map_err(|_| bad(key, format!("'{s}' is not a non-negative integer")))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, LabError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_f64(key, t)).collect()
}
