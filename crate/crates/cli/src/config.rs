//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 42
//! workers = 4
//! output = "runs/exp1"
//! textures = "textures"
//! plan_scope = "frame"            # or "episode"
//!
//! [planner]
//! variants_per_operation = 2
//! operations_enabled = ["remove", "restyle", "replace"]
//! strategy_mix = 0.5
//! surface = "wooden table"
//!
//! [planner.dil]
//! remove = 7
//! restyle = 0
//! replace = 7
//!
//! [backends]
//! mode = "stub"                   # or "remote"
//! annotations = "annotations"     # stub detector input
//! timeout_secs = 120
//! max_attempts = 3
//!
//! [backends.endpoints]
//! detector = "http://127.0.0.1:8080"
//! ```
//!
//! Relative paths resolve against the config file's directory. Endpoints
//! may be overridden per role with `NICE_ENDPOINT_<ROLE>`, e.g.
//! `NICE_ENDPOINT_MASK_INPAINTER`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sceneaug_core::backends::remote::{RemoteConfig, RetryPolicy};
use sceneaug_core::backends::BackendKind;
use sceneaug_core::PlannerConfig;

pub const ENDPOINT_ENV_PREFIX: &str = "NICE_ENDPOINT_";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    #[default]
    Stub,
    Remote,
}

/// Whether plan seeds are keyed by frame or shared across an episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanScope {
    #[default]
    Frame,
    Episode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub mode: BackendMode,
    /// Directory of `<frame_id>.detections.json` for the stub detector.
    /// Defaults to `<dataset>/annotations`.
    pub annotations: Option<PathBuf>,
    /// Base URL per role, keyed by role name (`detector`, `segmenter`,
    /// `mask_inpainter`, `prompted_inpainter`, `suggester`,
    /// `feature_extractor`).
    pub endpoints: BTreeMap<String, String>,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub min_score: f64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        let remote = RemoteConfig::new("");
        Self {
            mode: BackendMode::Stub,
            annotations: None,
            endpoints: BTreeMap::new(),
            timeout_secs: remote.timeout.as_secs(),
            max_attempts: remote.retry.max_attempts,
            backoff_ms: remote.retry.base_delay.as_millis() as u64,
            max_in_flight: remote.max_in_flight,
            min_score: remote.min_score,
        }
    }
}

impl BackendSettings {
    pub fn endpoint(&self, kind: BackendKind) -> Option<&str> {
        self.endpoints.get(kind.as_str()).map(String::as_str)
    }

    pub fn remote_config(&self, kind: BackendKind) -> Result<RemoteConfig> {
        let endpoint = self
            .endpoint(kind)
            .with_context(|| format!("no endpoint configured for the {} role", kind.as_str()))?;
        let mut config = RemoteConfig::new(endpoint);
        config.timeout = Duration::from_secs(self.timeout_secs);
        config.retry = RetryPolicy {
            max_attempts: self.max_attempts,
            base_delay: Duration::from_millis(self.backoff_ms),
            ..RetryPolicy::default()
        };
        config.max_in_flight = self.max_in_flight;
        config.min_score = self.min_score;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub textures: Option<PathBuf>,
    pub plan_scope: PlanScope,
    pub planner: PlannerConfig,
    pub backends: BackendSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            workers: 1,
            output: None,
            textures: None,
            plan_scope: PlanScope::Frame,
            planner: PlannerConfig::default(),
            backends: BackendSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Parse a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config =
            Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut config.output);
        resolve(base, &mut config.textures);
        resolve(base, &mut config.backends.annotations);
        Ok(config)
    }

    /// Replace endpoints from `NICE_ENDPOINT_<ROLE>` variables found by `lookup`.
    pub fn apply_env_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for kind in BackendKind::ALL {
            let var = format!("{ENDPOINT_ENV_PREFIX}{}", kind.as_str().to_uppercase());
            if let Some(url) = lookup(&var).filter(|u| !u.is_empty()) {
                self.backends.endpoints.insert(kind.as_str().to_string(), url);
            }
        }
    }

    /// Checks that apply to every command: planner sanity, referenced paths,
    /// and endpoint coverage in remote mode.
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if let Some(t) = &self.textures {
            if !t.is_dir() {
                bail!("texture store {} does not exist", t.display());
            }
        }
        if let Some(a) = &self.backends.annotations {
            if !a.is_dir() {
                bail!("annotation directory {} does not exist", a.display());
            }
        }
        for role in self.backends.endpoints.keys() {
            if !BackendKind::ALL.iter().any(|k| k.as_str() == role) {
                bail!("unknown backend role `{role}` in endpoints");
            }
        }
        if self.backends.mode == BackendMode::Remote && self.backends.max_attempts == 0 {
            bail!("max_attempts must be at least 1");
        }
        Ok(())
    }

    /// Remote mode needs an endpoint for each role a command uses.
    pub fn require_endpoints(&self, roles: &[BackendKind]) -> Result<()> {
        if self.backends.mode != BackendMode::Remote {
            return Ok(());
        }
        let missing: Vec<&str> = roles
            .iter()
            .filter(|k| self.backends.endpoint(**k).is_none())
            .map(|k| k.as_str())
            .collect();
        if !missing.is_empty() {
            bail!(
                "remote backends selected but no endpoint for: {} (set [backends.endpoints] or {ENDPOINT_ENV_PREFIX}<ROLE>)",
                missing.join(", ")
            );
        }
        Ok(())
    }
}
