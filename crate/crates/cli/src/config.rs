use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::args::Command;

pub const CONFIG_FILE: &str = "run_config.json";

/// How the MMI-2 label weight was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum LambdaMode {
    Fixed(f64),
    Estimated(f64),
}

/// Settings a run actually used. Fields a subcommand does not touch stay
/// unset and are omitted from the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtw_metric: Option<String>,
}

/// Written to every output directory; `mmidict --config` replays
/// `invocation`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub invocation: Command,
    pub settings: Settings,
}

impl RunConfig {
    pub fn new(invocation: Command, settings: Settings) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            settings,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
