use std::path::PathBuf;

use anyhow::Context;
use muscap_core::dataset::{load_caption_records, load_evaluation_records, make_split, write_jsonl};

use crate::config::Config;

#[derive(clap::Args)]
pub struct Args {
    /// Caption records (JSONL); defaults to `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Human-scored evaluation records that form the test split.
    #[arg(long)]
    eval_records: PathBuf,
    /// Number of validation records sampled from the training pool.
    #[arg(long, default_value_t = 0)]
    validation: usize,
    /// Keep only test records scored 2 on every perspective.
    #[arg(long)]
    all_2s: bool,
    /// Output directory for train.jsonl, validation.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let dataset = super::or_default(args.dataset, &cfg.paths.dataset);
    let records = load_caption_records(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let eval = load_evaluation_records(&args.eval_records)
        .with_context(|| format!("loading {}", args.eval_records.display()))?;
    let split = make_split(&records, &eval, args.validation, cfg.subsystem_seed("split"), args.all_2s)?;
    super::ensure_dir(&args.out_dir)?;
    write_jsonl(&args.out_dir.join("train.jsonl"), &split.train)?;
    write_jsonl(&args.out_dir.join("validation.jsonl"), &split.validation)?;
    write_jsonl(&args.out_dir.join("test.jsonl"), &split.test)?;
    tracing::info!(
        train = split.train.len(),
        validation = split.validation.len(),
        test = split.test.len(),
        "split written"
    );
    Ok(())
}
