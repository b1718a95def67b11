use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::record::StudySettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    /// Defaults for newly created studies.
    pub study: StudySettings,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            study: StudySettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

pub const ENV_PREFIX: &str = "IATPOLL_";

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// File (if any) first, then `IATPOLL_*` environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Recognised: `BIND`, `DATA_DIR`, `K_OUTLIERS`, `MIN_GAP_MS`, `TRIAL_COUNTS`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let bad = |message: String| ConfigError::Env {
                name: name.clone(),
                message,
            };
            match key {
                "BIND" => self.bind = value,
                "DATA_DIR" => self.data_dir = PathBuf::from(value),
                "K_OUTLIERS" => {
                    self.study.k_outliers = value.trim().parse().map_err(|e| bad(format!("{e}")))?
                }
                "MIN_GAP_MS" => {
                    self.study.min_gap_ms = if value.trim().is_empty() {
                        None
                    } else {
                        Some(value.trim().parse().map_err(|e| bad(format!("{e}")))?)
                    }
                }
                "TRIAL_COUNTS" => {
                    let counts = value
                        .split(',')
                        .map(|c| c.trim().parse::<u32>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("{e}")))?;
                    self.study.trial_counts = counts
                        .try_into()
                        .map_err(|_| bad("expected five comma-separated counts".into()))?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}
