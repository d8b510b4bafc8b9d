//! Flat `key = value` configuration.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}")]
    BadValue { line: usize, key: String },
    #[error("missing required key {0}")]
    Missing(&'static str),
    #[error("cannot read config: {0}")]
    Read(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorConfig {
    pub listen_addr: String,
    pub store_path: PathBuf,
    pub snapshot_interval_seconds: u64,
    pub scheduler_period_seconds: u64,
    pub master_seed: u64,
    pub nominal_ghz: f64,
    pub lease_floor_seconds: u64,
    pub ui_dir: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
}

impl CoordinatorConfig {
    pub fn new(store_path: impl Into<PathBuf>) -> Self {
        CoordinatorConfig {
            listen_addr: "127.0.0.1:8630".into(),
            store_path: store_path.into(),
            snapshot_interval_seconds: 86_400,
            scheduler_period_seconds: 60,
            master_seed: 0,
            nominal_ghz: 1.0,
            lease_floor_seconds: 120,
            ui_dir: None,
            snapshot_dir: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = CoordinatorConfig::new(PathBuf::new());
        let mut have_store = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let no = i + 1;
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(no))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue { line: no, key: key.to_string() };
            let int = || value.parse::<u64>().map_err(|_| bad());
            match key {
                "listen_addr" => cfg.listen_addr = value.to_string(),
                "store_path" => {
                    cfg.store_path = PathBuf::from(value);
                    have_store = true;
                }
                "snapshot_interval_seconds" => cfg.snapshot_interval_seconds = int()?,
                "scheduler_period_seconds" => cfg.scheduler_period_seconds = int()?.max(1),
                "master_seed" => cfg.master_seed = int()?,
                "nominal_ghz" => {
                    cfg.nominal_ghz = value.parse().ok().filter(|g: &f64| *g > 0.0 && g.is_finite()).ok_or_else(bad)?
                }
                "lease_floor_seconds" => cfg.lease_floor_seconds = int()?.max(1),
                "ui_dir" => cfg.ui_dir = Some(PathBuf::from(value)),
                "snapshot_dir" => cfg.snapshot_dir = Some(PathBuf::from(value)),
                _ => return Err(ConfigError::UnknownKey { line: no, key: key.to_string() }),
            }
        }
        if !have_store {
            return Err(ConfigError::Missing("store_path"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn snapshot_dir(&self) -> PathBuf {
        self.snapshot_dir.clone().unwrap_or_else(|| crate::store::snapshot_dir(&self.store_path))
    }
}
