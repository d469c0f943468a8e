//! Run configuration: an optional TOML file whose keys mirror the command
//! line. Flags given on the command line win over the file.

use std::path::{Path, PathBuf};

use chronoweave_core::retrieval::RetrievalParams;
use chronoweave_core::timeline::Order;
use chronoweave_core::PromptVariant;
use clap::ValueEnum;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_CACHE_DIR: &str = ".cache";
pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Live,
    Mock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub target: Option<String>,
    pub gold: Option<PathBuf>,
    pub variant: Option<PromptVariant>,
    pub backend: Option<BackendKind>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub order: Option<Order>,
    pub budget_tokens: Option<usize>,
    pub retrieval: Option<RetrievalParams>,
    pub templates: TemplatePaths,
    pub generation: GenerationSection,
    pub live: LiveSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatePaths {
    pub baseline: Option<PathBuf>,
    pub extended: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSection {
    pub base_url: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub max_retries: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Fails unless `path` names an existing regular file.
pub fn require_file(what: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{what} {} does not exist or is not a file",
            path.display()
        )))
    }
}
