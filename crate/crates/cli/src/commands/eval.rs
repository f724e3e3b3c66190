use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::ValueEnum;
use muscap_core::dataset::load_caption_records_loose;
use muscap_core::duoenc::load_checkpoint;
use muscap_core::featurize::read_features;
use muscap_core::retrieve::{evaluate, Direction, PoolMode, RetrievalReport};

use crate::config::{Config, AUDIO_FEATURES, FINAL_CHECKPOINT, TEXT_FEATURES};

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    TextToAudio,
    AudioToText,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    /// Rank against every test item.
    Global,
    /// Rank only against items of the query's genre.
    PerGenre,
}

#[derive(clap::Args)]
pub struct Args {
    /// Test records (JSONL); defaults to `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    /// Defaults to `<paths.checkpoint_dir>/final.tckp`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text-to-audio")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "global")]
    pool: PoolArg,
    /// Average a stored per-genre report instead of evaluating a model.
    #[arg(long, conflicts_with_all = ["dataset", "features_dir", "checkpoint"])]
    fixtures: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let report = match &args.fixtures {
        Some(path) => RetrievalReport::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let dataset = super::or_default(args.dataset, &cfg.paths.dataset);
            let features_dir = super::or_default(args.features_dir, &cfg.paths.features_dir);
            let checkpoint = args.checkpoint.unwrap_or_else(|| cfg.paths.checkpoint_dir.join(FINAL_CHECKPOINT));
            let records = load_caption_records_loose(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
            if records.is_empty() {
                bail!("{} has no records", dataset.display());
            }
            let params = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let text = read_features(&features_dir.join(TEXT_FEATURES))?;
            let audio = read_features(&features_dir.join(AUDIO_FEATURES))?;
            let direction = match args.direction {
                DirectionArg::TextToAudio => Direction::TextToAudio,
                DirectionArg::AudioToText => Direction::AudioToText,
            };
            let pool = match args.pool {
                PoolArg::Global => PoolMode::Global,
                PoolArg::PerGenre => PoolMode::PerGenre,
            };
            evaluate(&params, &records, &text, &audio, direction, pool)?
        }
    };
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if args.json {
        super::print_json(&report)
    } else {
        println!("{report}");
        Ok(())
    }
}
