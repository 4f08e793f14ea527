//! JSON application config. Every field is optional and falls back to its
//! default; unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::BucketPrior;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Settings};
use crate::learner::LearnerConfig;
use crate::tutor::TutorConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub bucket_prior: BucketPrior,
    pub tutor: TutorConfig,
    pub learner: LearnerConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            bucket_prior: BucketPrior::default(),
            tutor: TutorConfig::default(),
            learner: LearnerConfig::default(),
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AppConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config values are always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.settings().validate()?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn settings(&self) -> Settings {
        Settings {
            bucket_prior: self.bucket_prior,
            tutor: self.tutor,
            learner: self.learner,
            experiment: self.experiment,
        }
    }
}

pub fn load_config(path: &Path) -> Result<AppConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AppConfig::from_json(&text)
}
