use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use muscap_core::dataset::{load_caption_records_loose, CaptionRecord};
use muscap_core::duoenc::{load_checkpoint, ModelParams};
use muscap_core::featurize::{read_features, FeaturizerSettings, TextFeaturizerConfig};
use muscap_core::humeval::{load_items, HumevalItem, Method};
use muscap_core::retrieve::{build_index, EmbeddingIndex};
use serde::Serialize;

use crate::config::ServeConfig;
use crate::ServeError;

/// Model, featurizer and index needed to answer text queries.
pub struct SearchBackend {
    pub params: ModelParams,
    pub text_cfg: TextFeaturizerConfig,
    pub index: EmbeddingIndex,
}

pub(crate) struct Session {
    pub evaluator_id: String,
    pub queue: Vec<usize>,
    pub cursor: usize,
}

/// Append-only JSONL files, one writer at a time per file.
pub struct Logs {
    pub dir: PathBuf,
    files: Mutex<HashMap<&'static str, File>>,
}

pub const REQUEST_LOG: &str = "requests.jsonl";
pub const QUERY_LOG: &str = "queries.jsonl";
pub const RATING_LOG: &str = "ratings.jsonl";
pub const HUMEVAL_LOG: &str = "humeval.jsonl";

impl Logs {
    pub fn open(dir: &Path) -> Result<Self, ServeError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Mutex::new(HashMap::new()),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn append<T: Serialize>(&self, name: &'static str, value: &T) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(value)?;
        line.push(b'\n');
        let mut files = self.files.lock().expect("log lock");
        let file = match files.entry(name) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(OpenOptions::new().create(true).append(true).open(self.dir.join(name))?)
            }
        };
        file.write_all(&line)?;
        file.flush()
    }
}

pub struct AppState {
    pub records: Vec<CaptionRecord>,
    pub(crate) by_id: HashMap<String, usize>,
    pub search: Option<SearchBackend>,
    pub humeval_items: Vec<HumevalItem>,
    pub(crate) sessions: Mutex<HashMap<String, Session>>,
    /// Query id to the ids it returned.
    pub(crate) queries: Mutex<HashMap<String, Vec<String>>>,
    pub logs: Logs,
    pub seed: u64,
    pub default_k: usize,
}

impl AppState {
    pub fn new(
        records: Vec<CaptionRecord>,
        search: Option<SearchBackend>,
        humeval_items: Vec<HumevalItem>,
        logs_dir: &Path,
        seed: u64,
    ) -> Result<Self, ServeError> {
        let by_id = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.youtube_id.clone(), i))
            .collect();
        let logs = Logs::open(logs_dir)?;
        let queries = replay_queries(&logs.path(QUERY_LOG))?;
        Ok(Self {
            records,
            by_id,
            search,
            humeval_items,
            sessions: Mutex::new(HashMap::new()),
            queries: Mutex::new(queries),
            logs,
            seed,
            default_k: 9,
        })
    }

    /// Load everything named in `cfg`. Missing search inputs leave search
    /// disabled rather than failing startup.
    pub fn load(cfg: &ServeConfig) -> Result<Self, ServeError> {
        let records = match &cfg.dataset {
            Some(p) => load_caption_records_loose(p)?,
            None => Vec::new(),
        };
        let settings = match &cfg.featurizers {
            Some(p) => FeaturizerSettings::load(p)?,
            None => FeaturizerSettings::default(),
        };
        let search = match (&cfg.checkpoint, &cfg.audio_features) {
            (Some(ckpt), Some(audio)) => {
                let params = load_checkpoint(ckpt)?;
                let features = read_features(audio)?;
                let indexed: Vec<CaptionRecord> = records
                    .iter()
                    .filter(|r| features.get(&r.youtube_id).is_some())
                    .cloned()
                    .collect();
                let index = build_index(&params, &indexed, &features, &ckpt.display().to_string())?;
                tracing::info!(items = index.len(), checkpoint = %ckpt.display(), "search index built");
                Some(SearchBackend {
                    params,
                    text_cfg: settings.text,
                    index,
                })
            }
            _ => {
                tracing::warn!("no checkpoint or audio features configured; search disabled");
                None
            }
        };
        let items = match &cfg.humeval_items {
            Some(p) => load_items(p)?,
            None => Vec::new(),
        };
        let mut state = Self::new(records, search, items, &cfg.logs_dir, cfg.seed)?;
        state.default_k = cfg.default_k;
        Ok(state)
    }

    pub fn record(&self, id: &str) -> Option<&CaptionRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    /// Presentation order of methods for one item as seen by one evaluator.
    pub fn method_order(&self, item_id: &str, evaluator_id: &str) -> Vec<Method> {
        let seed = muscap_core::rng::derive_seed(self.seed, &format!("humeval.{evaluator_id}"));
        muscap_core::humeval::presentation_order(item_id, &Method::ALL, seed)
    }
}

fn replay_queries(path: &Path) -> Result<HashMap<String, Vec<String>>, ServeError> {
    let mut out = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))?;
        if let Some(id) = v["query_id"].as_str() {
            let results = v["results"]
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
                .unwrap_or_default();
            out.insert(id.to_string(), results);
        }
    }
    Ok(out)
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
