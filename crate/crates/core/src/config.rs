//! Flat key-value configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! model.thigh.mass = 7.2
//! validation.noise_peak_to_peak = 0.01
//! plant.nonlinear_linkage = false
//! ```
//!
//! The text is TOML, so dotted keys and `[section]` headers both work; values
//! are flattened into dotted keys after parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, toml::Value>,
    source: Option<PathBuf>,
    digest: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_source(text, None)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_source(&text, Some(path.to_path_buf()))
    }

    fn parse_with_source(text: &str, source: Option<PathBuf>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            match &source {
                Some(path) => Error::Parse {
                    path: path.clone(),
                    line,
                    message: e.message().to_string(),
                },
                None => Error::Config(format!("line {line}: {}", e.message())),
            }
        })?;
        let mut values = BTreeMap::new();
        flatten("", &toml::Value::Table(table), &mut values);
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self { values, source, digest })
    }

    /// SHA-256 of the raw configuration text, hex encoded.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: toml::Value) {
        self.values.insert(key.to_string(), value);
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a number, found {}",
                other.type_str()
            ))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as u64),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a non-negative integer, found {other}"
            ))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.u64_or(key, default as u64).map(|v| v as usize)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(Error::Config(format!("`{key}` must be true or false, found {other}"))),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<&str>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Error::Config(format!("`{key}` must be a string, found {other}"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(Error::Config(format!("`{key}` must contain numbers, found {other}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(Error::Config(format!(
                "`{key}` must be a list of numbers, found {other}"
            ))),
        }
    }

    /// Resolves a path-valued key relative to the directory of the config file.
    pub fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.str(key)?.map(|s| {
            let p = PathBuf::from(s);
            match (&self.source, p.is_relative()) {
                (Some(src), true) => src.parent().map(|d| d.join(&p)).unwrap_or(p),
                _ => p,
            }
        }))
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}
