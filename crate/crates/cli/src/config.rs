use std::path::{Path, PathBuf};

use absa_kit::Split;
use serde::{Deserialize, Serialize};

use crate::error::{Failure, Kind};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
pub const DEFAULT_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskList {
    Joined(String),
    Names(Vec<String>),
}

impl TaskList {
    pub fn spec(&self) -> String {
        match self {
            TaskList::Joined(s) => s.clone(),
            TaskList::Names(v) => v.join(","),
        }
    }
}

/// Pipeline settings as read from a TOML file. Every key is optional;
/// command line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: Option<PathBuf>,
    pub name: Option<String>,
    pub categories: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tasks: Option<TaskList>,
    pub k: Option<usize>,
    pub shot_splits: Option<Vec<Split>>,
    pub strategy: Option<String>,
    pub batch_size: Option<usize>,
    pub backend: Option<String>,
    pub templates: Option<PathBuf>,
    pub timeout_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub case_insensitive: Option<bool>,
    pub eval_split: Option<Split>,
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::new("config", Kind::Config, format!("{}: {e}", path.display()))
        })?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| {
            Failure::new("config", Kind::Config, format!("{}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data_dir,
            &mut cfg.categories,
            &mut cfg.out,
            &mut cfg.templates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings of one pipeline run, written next to its
/// artifacts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub data_dir: PathBuf,
    pub name: Option<String>,
    pub categories: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub tasks: String,
    pub k: Option<usize>,
    pub shot_splits: Vec<Split>,
    pub strategy: String,
    pub batch_size: Option<usize>,
    pub backend: String,
    pub templates: Option<PathBuf>,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub case_insensitive: bool,
    pub eval_split: Split,
}
