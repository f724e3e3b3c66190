use std::path::PathBuf;

use anyhow::Context;
use muscap_core::dataset::{canonicalize_genre, load_caption_records_loose};
use muscap_core::duoenc::load_checkpoint;
use muscap_core::featurize::{read_features, FeaturizerSettings};
use muscap_core::retrieve::{build_index, search};

use crate::config::{Config, AUDIO_FEATURES, FEATURIZERS, FINAL_CHECKPOINT};

#[derive(clap::Args)]
pub struct Args {
    /// Free-text query.
    query: String,
    #[arg(short, long, default_value_t = 9)]
    k: usize,
    /// Restrict results to one genre.
    #[arg(long)]
    genre: Option<String>,
    /// Records to search over; defaults to `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let dataset = super::or_default(args.dataset, &cfg.paths.dataset);
    let features_dir = super::or_default(args.features_dir, &cfg.paths.features_dir);
    let checkpoint = args.checkpoint.unwrap_or_else(|| cfg.paths.checkpoint_dir.join(FINAL_CHECKPOINT));
    let genre = args.genre.as_deref().map(canonicalize_genre).transpose()?;
    let records = load_caption_records_loose(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let params = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let audio = read_features(&features_dir.join(AUDIO_FEATURES))?;
    let settings_path = features_dir.join(FEATURIZERS);
    let text_cfg = if settings_path.exists() {
        FeaturizerSettings::load(&settings_path)?.text
    } else {
        cfg.text_features.clone()
    };
    let index = build_index(&params, &records, &audio, &checkpoint.display().to_string())?;
    let results = search(&args.query, &params, &text_cfg, &index, args.k, genre)?;
    if args.json {
        return super::print_json(&results);
    }
    for r in &results {
        println!("{:>3}  {:.4}  {}  {:<14}  {}", r.rank, r.similarity, r.youtube_id, r.genre.as_str(), r.caption);
    }
    Ok(())
}
