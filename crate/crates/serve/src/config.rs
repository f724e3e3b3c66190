use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub bind: String,
    /// Caption records shown by `/api/items` and attached to search hits.
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub audio_features: Option<PathBuf>,
    /// Featurizer settings written by `featurize`; defaults apply when absent.
    pub featurizers: Option<PathBuf>,
    pub humeval_items: Option<PathBuf>,
    pub logs_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub default_k: usize,
    pub seed: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            dataset: None,
            checkpoint: None,
            audio_features: None,
            featurizers: None,
            humeval_items: None,
            logs_dir: PathBuf::from("logs"),
            ui_dir: None,
            cors_origins: Vec::new(),
            default_k: 9,
            seed: 0,
        }
    }
}

impl ServeConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ServeError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))
    }

    /// Override fields from `MUSCAP_*` variables looked up through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ServeError> {
        if let Some(v) = var("MUSCAP_SERVE_BIND") {
            self.bind = v;
        }
        if let Some(v) = var("MUSCAP_SERVE_PORT") {
            let port: u16 = v.parse().map_err(|_| ServeError::Config(format!("bad MUSCAP_SERVE_PORT {v:?}")))?;
            let host = self.bind.rsplit_once(':').map_or(self.bind.as_str(), |(h, _)| h).to_string();
            self.bind = format!("{host}:{port}");
        }
        let path = |name: &str| var(name).map(PathBuf::from);
        if let Some(p) = path("MUSCAP_DATASET") {
            self.dataset = Some(p);
        }
        if let Some(p) = path("MUSCAP_CHECKPOINT") {
            self.checkpoint = Some(p);
        }
        if let Some(p) = path("MUSCAP_AUDIO_FEATURES") {
            self.audio_features = Some(p);
        }
        if let Some(p) = path("MUSCAP_FEATURIZERS") {
            self.featurizers = Some(p);
        }
        if let Some(p) = path("MUSCAP_HUMEVAL_ITEMS") {
            self.humeval_items = Some(p);
        }
        if let Some(p) = path("MUSCAP_LOGS_DIR") {
            self.logs_dir = p;
        }
        if let Some(p) = path("MUSCAP_UI_DIR") {
            self.ui_dir = Some(p);
        }
        Ok(())
    }
}
