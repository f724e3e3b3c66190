use std::path::PathBuf;

use crate::config::{Config, AUDIO_FEATURES, FEATURIZERS, FINAL_CHECKPOINT};

#[derive(clap::Args)]
pub struct Args {
    /// Address to listen on, e.g. 127.0.0.1:8080.
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    audio_features: Option<PathBuf>,
    /// Evaluation items with one caption per method (JSONL).
    #[arg(long)]
    humeval_items: Option<PathBuf>,
    #[arg(long)]
    logs_dir: Option<PathBuf>,
    /// Directory of static UI assets.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

fn existing(p: PathBuf) -> Option<PathBuf> {
    p.exists().then_some(p)
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let mut sc = cfg.serve.clone();
    let paths = &cfg.paths;
    sc.seed = cfg.subsystem_seed("serve");
    if let Some(b) = args.bind {
        sc.bind = b;
    }
    sc.dataset = args.dataset.or(sc.dataset).or_else(|| existing(paths.dataset.clone()));
    sc.checkpoint = args
        .checkpoint
        .or(sc.checkpoint)
        .or_else(|| existing(paths.checkpoint_dir.join(FINAL_CHECKPOINT)));
    sc.audio_features = args
        .audio_features
        .or(sc.audio_features)
        .or_else(|| existing(paths.features_dir.join(AUDIO_FEATURES)));
    sc.featurizers = sc.featurizers.or_else(|| existing(paths.features_dir.join(FEATURIZERS)));
    sc.humeval_items = args.humeval_items.or(sc.humeval_items);
    if let Some(l) = args.logs_dir {
        sc.logs_dir = l;
    }
    sc.ui_dir = args.ui_dir.or(sc.ui_dir);
    super::runtime()?.block_on(muscap_serve::run(sc))?;
    Ok(())
}
