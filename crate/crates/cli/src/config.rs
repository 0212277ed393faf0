//! Run configuration: flags override an optional `key = value` file, which
//! overrides built-in defaults.
//!
//! Recognised keys: `model.kind`, `model.lengthscale`, `model.variance`,
//! `model.shape`, `n`, `seed`, `count`, `out`, `threads`. Blank lines and
//! lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use curvgrf::{CorrelationKind, CorrelationModel};
use thiserror::Error;

pub const KEYS: &[&str] =
    &["model.kind", "model.lengthscale", "model.variance", "model.shape", "n", "seed", "count", "out", "threads"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("{path}:{line}: duplicate key `{key}`")]
    DuplicateKey { path: PathBuf, line: usize, key: String },
    #[error("invalid value `{value}` for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error(transparent)]
    Model(#[from] curvgrf::Error),
}

/// Parsed config file contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { path: path.into(), line: i + 1 });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { path: path.into(), line: i + 1, key: k.into() });
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey { path: path.into(), line: i + 1, key: k.into() });
            }
        }
        Ok(FileConfig { entries })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::Value {
                key: key.into(),
                value: v.clone(),
                reason: e.to_string(),
            }),
        }
    }
}

/// Picks the flag value, then the file value, then the default.
pub fn pick<T: std::str::FromStr>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Gaussian,
    #[value(name = "rational-quadratic", alias = "rq")]
    RationalQuadratic,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <ModelKind as clap::ValueEnum>::from_str(s, true)
    }
}

/// Model flags as given on the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ModelArgs {
    /// Correlation family [default: gaussian]
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Correlation length l [default: 1]
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// Field variance sigma^2 [default: 1]
    #[arg(long)]
    pub variance: Option<f64>,
    /// Shape parameter of the rational-quadratic family [default: 1]
    #[arg(long = "rq-shape")]
    pub rq_shape: Option<f64>,
}

impl ModelArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<CorrelationModel, ConfigError> {
        let kind = pick(self.model, file, "model.kind", ModelKind::Gaussian)?;
        let l = pick(self.lengthscale, file, "model.lengthscale", 1.0)?;
        let v = pick(self.variance, file, "model.variance", 1.0)?;
        let shape = pick(self.rq_shape, file, "model.shape", 1.0)?;
        let kind = match kind {
            ModelKind::Gaussian => CorrelationKind::Gaussian,
            ModelKind::RationalQuadratic => CorrelationKind::RationalQuadratic { shape },
        };
        Ok(CorrelationModel::new(kind, l, v)?)
    }
}
