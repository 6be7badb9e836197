//! `scenesmith.toml` plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use scenesmith_core::engine::EngineKind;
use scenesmith_core::generation::{GenerationConfig, GeneratorBackend, RemoteBackend, RemoteConfig, TemplateBackend};
use scenesmith_core::sync::DEFAULT_TOLERANCE_S;

pub const CONFIG_FILE: &str = "scenesmith.toml";
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_PORT: u16 = 8750;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Template,
    Remote,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub auth_token_env: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub max_attempts: Option<u32>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub kind: Option<EngineKind>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub tolerance_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewSection {
    pub port: Option<u16>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub review: ReviewSection,
}

impl FileConfig {
    /// Reads `path` if it exists; a missing file is an empty config.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.is_file() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Flags that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub engine: Option<EngineKind>,
    pub tolerance: Option<f64>,
    pub port: Option<u16>,
}

/// Fully resolved settings. Defaults need no network: template backend and
/// stub engine.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub root: PathBuf,
    pub seed: u64,
    pub remote: Option<RemoteConfig>,
    pub engine: EngineKind,
    pub tolerance_s: f64,
    pub port: u16,
    pub generation: GenerationConfig,
}

impl CliConfig {
    pub fn resolve(root: PathBuf, file: FileConfig, flags: &Overrides) -> anyhow::Result<Self> {
        let backend = flags.backend.or(file.backend.kind).unwrap_or_default();
        let remote = match backend {
            BackendKind::Template => None,
            BackendKind::Remote => {
                let endpoint = file.backend.endpoint.clone().context("backend.endpoint is required for the remote backend")?;
                let model_id = file.backend.model_id.clone().context("backend.model_id is required for the remote backend")?;
                let mut rc = RemoteConfig::new(endpoint, model_id);
                rc.auth_token_env = file.backend.auth_token_env.clone();
                Some(rc)
            }
        };
        let mut generation = GenerationConfig::default();
        if let Some(m) = file.generation.max_attempts {
            anyhow::ensure!(m >= 1, "generation.max_attempts must be at least 1");
            generation.max_attempts = m;
        }
        if let Some(p) = file.generation.parallelism {
            generation.parallelism = p.max(1);
        }
        let tolerance_s = flags.tolerance.or(file.validation.tolerance_s).unwrap_or(DEFAULT_TOLERANCE_S);
        anyhow::ensure!(tolerance_s.is_finite() && tolerance_s >= 0.0, "tolerance must be a non-negative number of seconds");
        Ok(Self {
            root,
            seed: flags.seed.or(file.generation.seed).unwrap_or(DEFAULT_SEED),
            remote,
            engine: flags.engine.or(file.engine.kind).unwrap_or_default(),
            tolerance_s,
            port: flags.port.or(file.review.port).unwrap_or(DEFAULT_PORT),
            generation,
        })
    }

    pub fn make_backend(&self) -> anyhow::Result<Box<dyn GeneratorBackend>> {
        Ok(match &self.remote {
            None => Box::new(TemplateBackend::new()),
            Some(rc) => Box::new(RemoteBackend::new(rc.clone()).map_err(|e| anyhow::anyhow!("remote backend: {e}"))?),
        })
    }
}
