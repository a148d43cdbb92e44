use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ldm_core::compiler::PlanMode;
use ldm_core::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

/// Wall-clock seconds per phase.
pub type Phases = BTreeMap<String, f64>;

/// Everything needed to reproduce an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model: PathBuf,
    pub data: Vec<PathBuf>,
    pub obs: Vec<String>,
    pub config: Option<SamplerConfig>,
    pub mode: Option<PlanMode>,
    pub tool_version: String,
    pub seed: u64,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
    pub phases: Phases,
    pub outputs: Vec<PathBuf>,
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

impl RunManifest {
    pub fn new(command: &str, model: &Path, data: &[PathBuf], obs: Vec<String>) -> RunManifest {
        RunManifest {
            command: command.into(),
            model: absolute(model),
            data: data.iter().map(|p| absolute(p)).collect(),
            obs,
            config: None,
            mode: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
            settings: BTreeMap::new(),
            phases: Phases::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<RunManifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
