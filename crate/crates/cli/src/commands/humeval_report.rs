use std::path::PathBuf;

use anyhow::Context;
use muscap_core::humeval::{load_ratings, report};

#[derive(clap::Args)]
pub struct Args {
    /// Rating log (JSONL).
    #[arg(long, alias = "fixtures")]
    ratings: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let ratings = load_ratings(&args.ratings).with_context(|| format!("loading {}", args.ratings.display()))?;
    let rep = report(&ratings)?;
    if args.json {
        super::print_json(&rep)
    } else {
        print!("{rep}");
        Ok(())
    }
}
