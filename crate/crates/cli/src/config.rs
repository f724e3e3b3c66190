use std::path::{Path, PathBuf};

use anyhow::Context;
use muscap_core::duoenc::TrainConfig;
use muscap_core::featurize::{AudioFeaturizerConfig, TextFeaturizerConfig};
use muscap_core::rng::derive_seed;
use muscap_serve::ServeConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset: PathBuf,
    pub audio_dir: PathBuf,
    pub features_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub logs_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/dataset.jsonl".into(),
            audio_dir: "data/audio".into(),
            features_dir: "data/features".into(),
            checkpoint_dir: "data/checkpoints".into(),
            logs_dir: "data/logs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_attempts: u32,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub initial_backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model_id: "gpt-4o".into(),
            api_key_env: "MUSCAP_API_KEY".into(),
            max_attempts: 4,
            max_in_flight: 4,
            timeout_secs: 120,
            initial_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Root seed; every stochastic step derives its own seed from it.
    pub seed: u64,
    pub paths: Paths,
    pub endpoint: EndpointConfig,
    pub text_features: TextFeaturizerConfig,
    pub audio_features: AudioFeaturizerConfig,
    pub train: TrainConfig,
    pub serve: ServeConfig,
}

pub const TEXT_FEATURES: &str = "text.tcfv";
pub const AUDIO_FEATURES: &str = "audio.tcfv";
pub const FEATURIZERS: &str = "featurizers.json";
pub const FINAL_CHECKPOINT: &str = "final.tckp";

impl Config {
    /// Read the TOML file if given, then apply environment overrides.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                if let Some(base) = p.parent() {
                    cfg.resolve_relative(base);
                }
                cfg
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(v) = var("MUSCAP_SEED") {
            self.seed = v.parse().with_context(|| format!("MUSCAP_SEED={v:?} is not an integer"))?;
        }
        if let Some(v) = var("MUSCAP_ENDPOINT") {
            self.endpoint.base_url = v;
        }
        if let Some(v) = var("MUSCAP_MODEL") {
            self.endpoint.model_id = v;
        }
        self.serve.apply_env(&var)?;
        Ok(())
    }

    /// Interpret relative paths from a config file against its directory.
    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for path in [&mut p.dataset, &mut p.audio_dir, &mut p.features_dir, &mut p.checkpoint_dir, &mut p.logs_dir] {
            fix(path);
        }
        let s = &mut self.serve;
        fix(&mut s.logs_dir);
        for path in [&mut s.dataset, &mut s.checkpoint, &mut s.audio_features, &mut s.featurizers, &mut s.humeval_items, &mut s.ui_dir]
            .into_iter()
            .flatten()
        {
            fix(path);
        }
    }

    pub fn subsystem_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}
