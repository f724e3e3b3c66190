use std::path::PathBuf;

use anyhow::{bail, Context};
use muscap_core::dataset::load_caption_records_loose;
use muscap_core::featurize::{
    featurize_texts, featurize_wav_files, write_features, FeatureSet, FeaturizerSettings,
};

use crate::config::{Config, AUDIO_FEATURES, FEATURIZERS, TEXT_FEATURES};

#[derive(clap::Args)]
pub struct Args {
    /// Caption dataset (JSONL); defaults to `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory holding `<youtube_id>.wav`; defaults to `paths.audio_dir`.
    #[arg(long)]
    audio_dir: Option<PathBuf>,
    /// Output directory; defaults to `paths.features_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Only write text features.
    #[arg(long)]
    text_only: bool,
    /// Leave out clips whose audio is missing or unreadable instead of failing.
    #[arg(long)]
    skip_missing: bool,
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let dataset = super::or_default(args.dataset, &cfg.paths.dataset);
    let audio_dir = super::or_default(args.audio_dir, &cfg.paths.audio_dir);
    let out_dir = super::or_default(args.out_dir, &cfg.paths.features_dir);
    let records = load_caption_records_loose(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
    super::ensure_dir(&out_dir)?;

    let texts: Vec<(String, String)> = records.iter().map(|r| (r.youtube_id.clone(), r.caption.clone())).collect();
    let text = FeatureSet::from_vectors(&featurize_texts(&texts, &cfg.text_features)?)?;
    write_features(&out_dir.join(TEXT_FEATURES), &text)?;
    tracing::info!(rows = text.len(), dim = text.dim(), "text features written");

    if !args.text_only {
        let files: Vec<(String, PathBuf)> = records
            .iter()
            .map(|r| (r.youtube_id.clone(), audio_dir.join(format!("{}.wav", r.youtube_id))))
            .collect();
        let mut vectors = Vec::with_capacity(files.len());
        for ((id, path), outcome) in files.iter().zip(featurize_wav_files(&files, &cfg.audio_features)?) {
            match outcome {
                Ok(v) => vectors.push(v),
                Err(e) if args.skip_missing => tracing::warn!(youtube_id = %id, path = %path.display(), error = %e, "audio skipped"),
                Err(e) => bail!("{}: {e}", path.display()),
            }
        }
        let audio = FeatureSet::from_vectors(&vectors)?;
        write_features(&out_dir.join(AUDIO_FEATURES), &audio)?;
        tracing::info!(rows = audio.len(), dim = audio.dim(), "audio features written");
    }

    let settings = FeaturizerSettings {
        text: cfg.text_features.clone(),
        audio: cfg.audio_features.clone(),
    };
    settings.save(&out_dir.join(FEATURIZERS))?;
    Ok(())
}
