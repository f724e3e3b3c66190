//! Deterministic raw features feeding the trainable projection heads:
//! hashed bag-of-words for captions and log-mel band statistics for audio.

mod audio;
mod store;
mod text;
mod wav;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audio::{
    band_centers_hz, featurize_audio, hz_to_mel, mel_filterbank, mel_to_hz, AudioFeaturizer,
    AudioFeaturizerConfig, BandStat,
};
pub use store::{
    manifest_path, read_features, write_features, FeatureSet, ManifestRow, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use text::{featurize_text, token_bucket, tokenize, TextFeaturizerConfig, TfWeighting};
pub use wav::{decode_wav, resample_linear, write_wav_i16, DecodedAudio};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid featurizer config: {0}")]
    InvalidConfig(String),
    #[error("empty audio")]
    EmptyAudio,
    #[error("non-finite sample at index {0}")]
    NonFiniteSamples(usize),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("corrupt feature file: {0}")]
    CorruptFeatureFile(String),
    #[error("feature file version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("feature manifest: {0}")]
    Manifest(String),
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("duplicate feature id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Featurizer settings stored next to feature files so that queries are
/// embedded exactly like the training captions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerSettings {
    pub text: TextFeaturizerConfig,
    pub audio: AudioFeaturizerConfig,
}

impl FeaturizerSettings {
    pub fn load(path: &std::path::Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| FeatureError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FeatureError> {
        let json = serde_json::to_string_pretty(self).expect("settings serialize");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// A raw feature vector tied to the clip it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub source_id: String,
    pub values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(source_id: &str, values: Vec<f32>) -> Self {
        Self {
            source_id: source_id.to_string(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Featurize `(id, caption)` pairs on the rayon pool; output keeps input order.
pub fn featurize_texts(
    items: &[(String, String)],
    cfg: &TextFeaturizerConfig,
) -> Result<Vec<FeatureVector>, FeatureError> {
    items
        .par_iter()
        .map(|(id, text)| featurize_text(id, text, cfg))
        .collect()
}

/// Featurize `(id, pcm)` pairs on the rayon pool; output keeps input order.
pub fn featurize_clips(
    items: &[(String, Vec<f32>)],
    cfg: &AudioFeaturizerConfig,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let f = AudioFeaturizer::new(cfg.clone())?;
    items
        .par_iter()
        .map(|(id, pcm)| f.featurize(id, pcm))
        .collect()
}

/// Decode and featurize WAV files in parallel; one result per input, in order.
pub fn featurize_wav_files(
    items: &[(String, std::path::PathBuf)],
    cfg: &AudioFeaturizerConfig,
) -> Result<Vec<Result<FeatureVector, FeatureError>>, FeatureError> {
    let f = AudioFeaturizer::new(cfg.clone())?;
    Ok(items
        .par_iter()
        .map(|(id, path)| {
            let audio = decode_wav(path, Some(cfg.sample_rate))?;
            f.featurize(id, &audio.samples)
        })
        .collect())
}
