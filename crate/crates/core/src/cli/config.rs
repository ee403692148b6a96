//! Versioned TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagger::{GridSpec, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Annotation type kept when reading standoff or TSV input.
    pub label: String,
    /// Share of samples kept for training by `split`.
    pub train_ratio: f64,
    pub stratify: bool,
    /// Lowercase text before vocabulary lookup.
    pub lowercase: bool,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            label: "ADR".into(),
            train_ratio: 0.8,
            stratify: true,
            lowercase: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Familiar-word list for Dale-Chall; the bundled list when absent.
    pub familiar_words: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            corpus: CorpusSection::default(),
            train: TrainConfig::default(),
            grid: GridSpec::default(),
            seeds: default_seeds(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&body).map_err(|e| match e {
            Error::Config(message) => Error::Config(format!("{}: {message}", path.display())),
            other => other,
        })
    }

    pub fn parse(body: &str) -> Result<Self> {
        let config: Self = toml::from_str(body).map_err(|e| Error::Config(e.message().to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        config.train.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
