use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::Deserialize;
use thiserror::Error;

use crate::export::{DEFAULT_BATCH_SIZE, DEFAULT_ENDPOINT};
use crate::interlayer::BlockPoint;
use crate::llm::{DEFAULT_BASE_URL, DEFAULT_MAX_ATTEMPTS, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::repair::DEFAULT_VERSION;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Script,
    Dump,
    Http,
}

/// `x,y,z`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offset(pub BlockPoint);

impl FromStr for Offset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [x, y, z] = parts.as_slice() else {
            return Err(format!("expected x,y,z but got {s:?}"));
        };
        let n = |v: &str| v.parse::<i32>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Offset(BlockPoint::new(n(x)?, n(y)?, n(z)?)))
    }
}

impl<'de> Deserialize<'de> for Offset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Triple([i32; 3]),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Triple(c) => Ok(Offset(BlockPoint::from_coords(c))),
        }
    }
}

/// Keys accepted in the TOML config file. Every key is optional and is
/// overridden by the matching command-line flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prompt: Option<String>,
    pub refine: Option<bool>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_attempts: Option<u32>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub trials: Option<usize>,
    pub fixtures: Option<PathBuf>,
    pub registry: Option<String>,
    pub aliases: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub require: Option<Vec<String>>,
    pub targets: Option<Vec<TargetKind>>,
    pub endpoint: Option<String>,
    pub offset: Option<Offset>,
    pub batch_size: Option<usize>,
    pub gdpc_axes: Option<bool>,
    pub start_point: Option<Offset>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml { path: path.to_owned(), source })
    }
}

/// Fully resolved settings for `generate` and `eval`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub refine: bool,
    pub model: String,
    pub base_url: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub max_attempts: u32,
    pub seed: Option<u64>,
    pub parallelism: usize,
    pub fixtures: Option<PathBuf>,
    pub registry: String,
    pub aliases: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub require: Vec<String>,
    pub targets: Vec<TargetKind>,
    pub endpoint: String,
    pub offset: BlockPoint,
    pub batch_size: usize,
    pub gdpc_axes: bool,
    pub start_point: Option<BlockPoint>,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            refine: true,
            model: DEFAULT_MODEL.into(),
            base_url: DEFAULT_BASE_URL.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            seed: None,
            parallelism: 4,
            fixtures: None,
            registry: DEFAULT_VERSION.into(),
            aliases: None,
            keywords: None,
            prompts: None,
            require: Vec::new(),
            targets: vec![TargetKind::Script, TargetKind::Dump],
            endpoint: DEFAULT_ENDPOINT.into(),
            offset: BlockPoint::ORIGIN,
            batch_size: DEFAULT_BATCH_SIZE,
            gdpc_axes: false,
            start_point: None,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Layers a config file over the defaults. Flags are applied on top by
    /// the caller.
    pub fn from_file(file: &FileConfig) -> Self {
        let d = Self::default();
        Self {
            refine: file.refine.unwrap_or(d.refine),
            model: file.model.clone().unwrap_or(d.model),
            base_url: file.base_url.clone().unwrap_or(d.base_url),
            temperature: file.temperature.unwrap_or(d.temperature),
            max_tokens: file.max_tokens.or(d.max_tokens),
            max_attempts: file.max_attempts.unwrap_or(d.max_attempts),
            seed: file.seed.or(d.seed),
            parallelism: file.parallelism.unwrap_or(d.parallelism),
            fixtures: file.fixtures.clone().or(d.fixtures),
            registry: file.registry.clone().unwrap_or(d.registry),
            aliases: file.aliases.clone().or(d.aliases),
            keywords: file.keywords.clone().or(d.keywords),
            prompts: file.prompts.clone().or(d.prompts),
            require: file.require.clone().unwrap_or(d.require),
            targets: file.targets.clone().unwrap_or(d.targets),
            endpoint: file.endpoint.clone().unwrap_or(d.endpoint),
            offset: file.offset.map_or(d.offset, |o| o.0),
            batch_size: file.batch_size.unwrap_or(d.batch_size),
            gdpc_axes: file.gdpc_axes.unwrap_or(d.gdpc_axes),
            start_point: file.start_point.map(|o| o.0).or(d.start_point),
            out: file.out.clone().unwrap_or(d.out),
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("max_attempts must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConfigError::Invalid(format!("temperature {} is not a valid value", self.temperature)));
        }
        if let Some(dir) = &self.fixtures {
            if !dir.is_dir() {
                return Err(ConfigError::Invalid(format!("fixture directory {} does not exist", dir.display())));
            }
        }
        Ok(())
    }
}
