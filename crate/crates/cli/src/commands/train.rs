use std::path::{Path, PathBuf};

use anyhow::Context;
use muscap_core::dataset::load_caption_records_loose;
use muscap_core::duoenc::{save_checkpoint, train, write_loss_csv, PairedFeatures, TrainConfig};
use muscap_core::featurize::{read_features, FeatureSet};

use crate::config::{Config, AUDIO_FEATURES, FINAL_CHECKPOINT, TEXT_FEATURES};

#[derive(clap::Args)]
pub struct Args {
    /// Training records (JSONL); defaults to `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Validation records; the mean loss on them is logged after every epoch.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Directory with text.tcfv and audio.tcfv; defaults to `paths.features_dir`.
    #[arg(long)]
    features_dir: Option<PathBuf>,
    /// Checkpoint directory; defaults to `paths.checkpoint_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Hidden layer width; 0 trains purely linear heads.
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Also save `epoch-NNNN.tckp` every N epochs (0 = final only).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
}

pub fn paired(records_path: &Path, text: &FeatureSet, audio: &FeatureSet) -> anyhow::Result<PairedFeatures> {
    let records =
        load_caption_records_loose(records_path).with_context(|| format!("loading {}", records_path.display()))?;
    let ids: Vec<String> = records.into_iter().map(|r| r.youtube_id).collect();
    Ok(PairedFeatures::from_sets(&ids, text, audio)?)
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let dataset = super::or_default(args.dataset, &cfg.paths.dataset);
    let features_dir = super::or_default(args.features_dir, &cfg.paths.features_dir);
    let out_dir = super::or_default(args.out_dir, &cfg.paths.checkpoint_dir);
    let text = read_features(&features_dir.join(TEXT_FEATURES))?;
    let audio = read_features(&features_dir.join(AUDIO_FEATURES))?;
    let data = paired(&dataset, &text, &audio)?;
    let validation = args.validation.as_deref().map(|p| paired(p, &text, &audio)).transpose()?;

    let tc = TrainConfig {
        epochs: args.epochs.unwrap_or(cfg.train.epochs),
        batch_size: args.batch_size.unwrap_or(cfg.train.batch_size),
        learning_rate: args.learning_rate.unwrap_or(cfg.train.learning_rate),
        embed_dim: args.embed_dim.unwrap_or(cfg.train.embed_dim),
        hidden_dim: args.hidden_dim.unwrap_or(cfg.train.hidden_dim),
        seed: cfg.subsystem_seed("train"),
        ..cfg.train.clone()
    };
    super::ensure_dir(&out_dir)?;
    tracing::info!(pairs = data.len(), epochs = tc.epochs, batch = tc.batch_size, "training");
    let every = args.checkpoint_every;
    let outcome = train(&data, validation.as_ref(), &tc, |epoch, params| {
        if every > 0 && (epoch + 1) % every == 0 {
            save_checkpoint(params, &out_dir.join(format!("epoch-{:04}.tckp", epoch + 1)))?;
        }
        Ok(())
    })?;
    save_checkpoint(&outcome.params, &out_dir.join(FINAL_CHECKPOINT))?;
    write_loss_csv(&out_dir.join("loss.csv"), &outcome.history)?;
    if !outcome.validation.is_empty() {
        write_loss_csv(&out_dir.join("validation_loss.csv"), &outcome.validation)?;
    }
    std::fs::write(out_dir.join("train_config.json"), serde_json::to_string_pretty(&tc)? + "\n")?;
    if let Some(last) = outcome.history.last() {
        tracing::info!(steps = outcome.history.len(), final_loss = last.loss, "training finished");
    }
    Ok(())
}
